//! Benchmark cases: parameterization, bounds, start sets, episodes.

use super::tank::{TankParams, TankState, A_P};
use crate::domain::{EvalOutcome, SearchDomain};
use crate::error::{Error, Result};
use crate::optimizer::Objective;

pub const CASE_NAMES: [&str; 4] = ["pi_8l", "pi_7l", "cascaded_pi", "lqi"];

/// Default standard deviation of the volume measurements, liters.
pub const MEASUREMENT_NOISE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Pi,
    CascadedPi,
    Lqi,
}

impl CaseKind {
    pub fn n_params(self) -> usize {
        match self {
            Self::Pi => 2,
            Self::CascadedPi => 5,
            Self::Lqi => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Rmse,
    Mae,
}

impl ObjectiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rmse => "rmse",
            Self::Mae => "mae",
        }
    }
}

/// A reference step applied at `time`, as an offset added to all later references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceStep {
    pub time: f64,
    pub offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCase {
    pub name: String,
    pub kind: CaseKind,
    pub objective: ObjectiveKind,
    /// Crash once `V2` reaches this volume, liters.
    pub crash_threshold: f64,
    /// Raw parameter bounds.
    pub bounds: SearchDomain,
    /// Box of feasible, poorly performing starting points (raw units).
    pub start_set: SearchDomain,
    pub params: TankParams,
    pub duration: f64,
    pub noise_std: f64,
    /// Initial `V4`; the episode starts at the matching equilibrium.
    pub initial_v4: f64,
    /// Valve openings held by the PI cases (`v1` is tuned in `cascaded_pi`).
    pub valve_v1: f64,
    pub valve_v6: f64,
    /// `(kp, ki)` of the flow loop in the single-loop PI cases.
    pub inner_gains: [f64; 2],
    pub steps: Vec<ReferenceStep>,
    /// Divides raw objective values so that start-set values are near one.
    pub objective_scale: f64,
    /// Evaluation budget used by the benchmark campaigns.
    pub default_budget: usize,
}

impl BenchmarkCase {
    pub fn dim(&self) -> usize {
        self.kind.n_params()
    }

    /// Equilibrium at `initial_v4` with V1 at `v1` percent and V6 at the case value.
    pub fn initial_state(&self, v1: f64) -> TankState {
        self.params.equilibrium_for_flow(self.initial_flow(), v1, self.valve_v6)
    }

    /// Steady throughput at the initial state, l/s.
    pub fn initial_flow(&self) -> f64 {
        self.params.flow_for_level(self.initial_v4, self.valve_v6)
    }

    /// Reference volumes at time `t`: the default-valve initial state plus every step already taken.
    pub fn reference(&self, t: f64) -> TankState {
        let mut r = self.initial_state(self.valve_v1).to_array();
        for step in self.steps.iter().filter(|s| t >= s.time) {
            for (ri, oi) in r.iter_mut().zip(step.offset) {
                *ri += oi;
            }
        }
        TankState::from_array(r)
    }
}

fn pi_case(name: &str, threshold: f64) -> BenchmarkCase {
    BenchmarkCase {
        name: name.into(),
        kind: CaseKind::Pi,
        objective: ObjectiveKind::Rmse,
        crash_threshold: threshold,
        bounds: SearchDomain::new(vec![0.0, 0.0], vec![1.0, 0.016]).expect("valid bounds"),
        start_set: SearchDomain::new(vec![0.15, 0.0], vec![0.3, 0.003]).expect("valid bounds"),
        params: TankParams::calibrated(),
        duration: 120.0,
        noise_std: MEASUREMENT_NOISE,
        initial_v4: 3.3,
        valve_v1: A_P[1],
        valve_v6: A_P[2],
        inner_gains: [0.0, 0.2],
        steps: vec![ReferenceStep {
            time: 5.0,
            offset: [0.0, 0.0, 1.0],
        }],
        objective_scale: 0.5,
        default_budget: 49,
    }
}

/// Builds one of [`CASE_NAMES`].
pub fn make_case(name: &str) -> Result<BenchmarkCase> {
    let case = match name {
        "pi_8l" => pi_case(name, 8.0),
        "pi_7l" => pi_case(name, 7.0),
        "cascaded_pi" => BenchmarkCase {
            kind: CaseKind::CascadedPi,
            bounds: SearchDomain::new(vec![0.0, 0.0, 0.0, 0.0, 30.0], vec![1.0, 0.016, 1.0, 1.0, 100.0]).expect("valid bounds"),
            start_set: SearchDomain::new(vec![0.15, 0.0, 0.0, 0.1, 43.3], vec![0.3, 0.003, 0.1, 0.3, 50.0]).expect("valid bounds"),
            default_budget: 49,
            ..pi_case(name, 8.0)
        },
        "lqi" => BenchmarkCase {
            name: name.into(),
            kind: CaseKind::Lqi,
            objective: ObjectiveKind::Mae,
            crash_threshold: 7.5,
            bounds: SearchDomain::new(vec![-2.0; 8], vec![2.0; 8]).expect("valid bounds"),
            start_set: SearchDomain::new(vec![-0.5; 8], vec![0.5; 8]).expect("valid bounds"),
            params: TankParams::calibrated(),
            duration: 240.0,
            noise_std: MEASUREMENT_NOISE,
            initial_v4: 4.0,
            valve_v1: A_P[1],
            valve_v6: A_P[2],
            inner_gains: [0.0, 0.0],
            steps: vec![
                ReferenceStep {
                    time: 5.0,
                    offset: [0.5; 3],
                },
                ReferenceStep {
                    time: 120.0,
                    offset: [-0.5; 3],
                },
            ],
            objective_scale: 0.03,
            default_budget: 72,
        },
        other => return Err(Error::UnsupportedCase(other.to_string())),
    };
    Ok(case)
}

/// A case as a black-box tuning objective over raw parameters.
#[derive(Debug, Clone)]
pub struct CaseObjective {
    pub case: BenchmarkCase,
}

impl CaseObjective {
    pub fn new(case: BenchmarkCase) -> Self {
        Self { case }
    }
}

impl Objective for CaseObjective {
    fn domain(&self) -> &SearchDomain {
        &self.case.bounds
    }

    fn evaluate(&self, x_raw: &[f64], seed: u64) -> EvalOutcome {
        super::episode::evaluate_case(&self.case, x_raw, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_of_cases() {
        let c = make_case("pi_7l").unwrap();
        assert_eq!((c.dim(), c.objective, c.crash_threshold), (2, ObjectiveKind::Rmse, 7.0));
        let c = make_case("pi_8l").unwrap();
        assert_eq!((c.dim(), c.objective, c.crash_threshold), (2, ObjectiveKind::Rmse, 8.0));
        let c = make_case("cascaded_pi").unwrap();
        assert_eq!((c.dim(), c.objective, c.crash_threshold), (5, ObjectiveKind::Rmse, 8.0));
        let c = make_case("lqi").unwrap();
        assert_eq!((c.dim(), c.objective, c.crash_threshold), (8, ObjectiveKind::Mae, 7.5));
        assert_eq!(c.bounds.dim(), 8);
    }

    #[test]
    fn unsupported_cases() {
        assert!(matches!(make_case("mpc_ekf"), Err(Error::UnsupportedCase(_))));
        assert!(matches!(make_case(""), Err(Error::UnsupportedCase(_))));
    }

    #[test]
    fn start_sets_lie_inside_bounds() {
        for name in CASE_NAMES {
            let c = make_case(name).unwrap();
            for i in 0..c.dim() {
                assert!(c.start_set.lower()[i] >= c.bounds.lower()[i]);
                assert!(c.start_set.upper()[i] <= c.bounds.upper()[i]);
            }
        }
    }

    #[test]
    fn initial_states_are_below_thresholds() {
        for name in CASE_NAMES {
            let c = make_case(name).unwrap();
            let s0 = c.initial_state(c.valve_v1);
            assert!(s0.v2 < c.crash_threshold, "{name}");
            let last = c.reference(c.duration);
            let peak = c.steps.iter().map(|s| c.reference(s.time).v2).fold(last.v2, f64::max);
            assert!(peak < c.crash_threshold, "{name}");
        }
    }

    #[test]
    fn lqi_references_step_up_then_back() {
        let c = make_case("lqi").unwrap();
        let s0 = c.reference(0.0);
        let mid = c.reference(60.0);
        let end = c.reference(200.0);
        assert!((mid.v2 - s0.v2 - 0.5).abs() < 1e-12);
        assert!((end.v4 - s0.v4).abs() < 1e-12);
    }
}
