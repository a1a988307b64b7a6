//! Closed-loop episodes, crash detection and the tracking objectives.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::cases::{BenchmarkCase, CaseKind, ObjectiveKind};
use super::control::{CascadedPi, Controller, Lqi, Measurement};
use super::tank::{linearize_discretize, rk4_step, ControlInput, TankState};
use crate::domain::EvalOutcome;
use crate::error::{Error, Result};

/// Tunable controller parameters, in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ControllerSpec {
    Pi {
        kp_out: f64,
        ki_out: f64,
    },
    CascadedPi {
        kp_out: f64,
        ki_out: f64,
        kp_in: f64,
        ki_in: f64,
        u_v1: f64,
    },
    Lqi {
        exponents: [f64; 8],
    },
}

impl ControllerSpec {
    pub fn n_params(&self) -> usize {
        match self {
            Self::Pi { .. } => 2,
            Self::CascadedPi { .. } => 5,
            Self::Lqi { .. } => 8,
        }
    }

    /// Interprets a raw parameter vector for the given case.
    pub fn from_params(case: &BenchmarkCase, x: &[f64]) -> Result<Self> {
        let expected = case.kind.n_params();
        if x.len() != expected {
            return Err(Error::SpecMismatch {
                case: case.name.clone(),
                expected,
                got: x.len(),
            });
        }
        Ok(match case.kind {
            CaseKind::Pi => Self::Pi {
                kp_out: x[0],
                ki_out: x[1],
            },
            CaseKind::CascadedPi => Self::CascadedPi {
                kp_out: x[0],
                ki_out: x[1],
                kp_in: x[2],
                ki_in: x[3],
                u_v1: x[4],
            },
            CaseKind::Lqi => {
                let mut exponents = [0.0; 8];
                exponents.copy_from_slice(x);
                Self::Lqi { exponents }
            }
        })
    }

    fn matches(&self, kind: CaseKind) -> bool {
        matches!(
            (self, kind),
            (Self::Pi { .. }, CaseKind::Pi) | (Self::CascadedPi { .. }, CaseKind::CascadedPi) | (Self::Lqi { .. }, CaseKind::Lqi)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: TankState,
    pub input: ControlInput,
    pub reference: TankState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    /// `Success(objective)` under the case's objective, or `Crash`.
    pub outcome: EvalOutcome,
    /// Samples up to and including the crash sample, if any.
    pub trajectory: Vec<Sample>,
    pub crash_time: Option<f64>,
    pub dt: f64,
}

impl EpisodeResult {
    pub fn is_crash(&self) -> bool {
        self.outcome.is_crash()
    }

    pub fn duration(&self) -> f64 {
        self.trajectory.len() as f64 * self.dt
    }

    pub fn max_v2(&self) -> f64 {
        self.trajectory.iter().map(|s| s.state.v2).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `sqrt((1/T) sum (V4 - V4_ref)^2 dt)` over the trajectory.
pub fn objective_rmse(res: &EpisodeResult) -> Result<f64> {
    if res.is_crash() {
        return Err(Error::CrashedEpisode);
    }
    Ok(rmse(&res.trajectory, res.dt))
}

/// `0.5 MAE(V2) + 0.25 MAE(V3) + 0.25 MAE(V4)`.
pub fn objective_mae(res: &EpisodeResult) -> Result<f64> {
    if res.is_crash() {
        return Err(Error::CrashedEpisode);
    }
    Ok(weighted_mae(&res.trajectory, res.dt))
}

pub(crate) fn rmse(traj: &[Sample], dt: f64) -> f64 {
    if traj.is_empty() {
        return 0.0;
    }
    let horizon = traj.len() as f64 * dt;
    let integral: f64 = traj.iter().map(|s| (s.state.v4 - s.reference.v4).powi(2) * dt).sum();
    (integral / horizon).sqrt()
}

pub(crate) fn weighted_mae(traj: &[Sample], dt: f64) -> f64 {
    if traj.is_empty() {
        return 0.0;
    }
    let horizon = traj.len() as f64 * dt;
    let mae = |f: fn(&TankState) -> f64| -> f64 {
        traj.iter().map(|s| (f(&s.state) - f(&s.reference)).abs() * dt).sum::<f64>() / horizon
    };
    0.5 * mae(|s| s.v2) + 0.25 * mae(|s| s.v3) + 0.25 * mae(|s| s.v4)
}

fn crashed(trajectory: Vec<Sample>, crash_time: f64, dt: f64) -> EpisodeResult {
    EpisodeResult {
        outcome: EvalOutcome::Crash,
        trajectory,
        crash_time: Some(crash_time),
        dt,
    }
}

/// Simulates one closed-loop episode of `case` with controller `spec`.
///
/// Each sample: measure (volumes with Gaussian noise, exact pump flow), compute
/// the input, log the sample, abort with a crash if `V2` reached the threshold
/// or the state is not finite, then integrate one RK4 step with the input held.
pub fn run_episode(spec: &ControllerSpec, case: &BenchmarkCase, seed: u64) -> Result<EpisodeResult> {
    if !spec.matches(case.kind) {
        return Err(Error::SpecMismatch {
            case: case.name.clone(),
            expected: case.kind.n_params(),
            got: spec.n_params(),
        });
    }
    let p = case.params;
    let dt = p.dt;
    let v1 = match spec {
        ControllerSpec::CascadedPi { u_v1, .. } => *u_v1,
        _ => case.valve_v1,
    };
    let s0 = case.initial_state(v1);
    let q0 = case.initial_flow();
    let mut controller: Box<dyn Controller> = match spec {
        ControllerSpec::Pi { kp_out, ki_out } => {
            let [kp_in, ki_in] = case.inner_gains;
            Box::new(CascadedPi::new(*kp_out, *ki_out, kp_in, ki_in, v1, case.valve_v6, q0, &p))
        }
        ControllerSpec::CascadedPi {
            kp_out,
            ki_out,
            kp_in,
            ki_in,
            ..
        } => Box::new(CascadedPi::new(*kp_out, *ki_out, *kp_in, *ki_in, v1, case.valve_v6, q0, &p)),
        ControllerSpec::Lqi { exponents } => {
            let (a, b) = linearize_discretize(&p);
            match Lqi::synthesize(&a, &b, exponents, p.equilibrium_input(&s0), dt) {
                Ok(c) => Box::new(c),
                // synthesis failure rejects the parameterization like a crash
                Err(_) => return Ok(crashed(Vec::new(), 0.0, dt)),
            }
        }
    };

    let noise = Normal::new(0.0, case.noise_std.max(0.0)).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_samples = (case.duration / dt).round() as usize;
    let mut traj = Vec::with_capacity(n_samples);
    let mut state = s0;
    let mut pump_flow = q0;
    for k in 0..n_samples {
        let t = k as f64 * dt;
        let reference = case.reference(t);
        let mut sample_noise = || if case.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        let meas = Measurement {
            volumes: TankState::new(state.v2 + sample_noise(), state.v3 + sample_noise(), state.v4 + sample_noise()),
            pump_flow,
        };
        let input = controller.control(&meas, &reference);
        traj.push(Sample {
            t,
            state,
            input,
            reference,
        });
        if !state.is_finite() || state.v2 >= case.crash_threshold {
            return Ok(crashed(traj, t, dt));
        }
        state = rk4_step(&state, &input, &p, dt);
        pump_flow = p.pump_gain * input.pump;
    }

    let value = match case.objective {
        ObjectiveKind::Rmse => rmse(&traj, dt),
        ObjectiveKind::Mae => weighted_mae(&traj, dt),
    };
    Ok(EpisodeResult {
        outcome: EvalOutcome::from_value(value),
        trajectory: traj,
        crash_time: None,
        dt,
    })
}

/// Simulates at raw parameters `x` and returns the outcome.
pub fn evaluate_case(case: &BenchmarkCase, x: &[f64], seed: u64) -> EvalOutcome {
    match ControllerSpec::from_params(case, x).and_then(|spec| run_episode(&spec, case, seed)) {
        Ok(res) => res.outcome,
        Err(_) => EvalOutcome::Crash,
    }
}
