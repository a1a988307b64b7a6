//! PI, cascaded PI and LQI controllers running at the sample rate.

use nalgebra::{DMatrix, DVector};

use super::dare::{solve_dare, DareSolution};
use super::tank::{ControlInput, TankParams, TankState};
use crate::error::Result;

/// What the controller sees each sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub volumes: TankState,
    /// Flow produced by the pump, l/s.
    pub pump_flow: f64,
}

pub trait Controller {
    fn control(&mut self, meas: &Measurement, reference: &TankState) -> ControlInput;
}

/// Positional PI with output saturation and clamping anti-windup: the
/// integrator freezes whenever the output is saturated and the error would
/// push it further into saturation.
#[derive(Debug, Clone, PartialEq)]
pub struct PiLoop {
    pub kp: f64,
    pub ki: f64,
    pub bias: f64,
    pub out_min: f64,
    pub out_max: f64,
    pub dt: f64,
    integral: f64,
}

impl PiLoop {
    pub fn new(kp: f64, ki: f64, bias: f64, out_min: f64, out_max: f64, dt: f64) -> Self {
        Self {
            kp,
            ki,
            bias,
            out_min,
            out_max,
            dt,
            integral: 0.0,
        }
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn update(&mut self, error: f64) -> f64 {
        let candidate = self.integral + self.ki * error * self.dt;
        let unsat = self.bias + self.kp * error + candidate;
        let winding_up = (unsat > self.out_max && error > 0.0) || (unsat < self.out_min && error < 0.0);
        if !winding_up {
            self.integral = candidate;
        }
        (self.bias + self.kp * error + self.integral).clamp(self.out_min, self.out_max)
    }
}

/// Outer level loop on V4 commanding a pump-flow setpoint, tracked by an
/// inner flow loop acting on `U_P`. Both valves are held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedPi {
    outer: PiLoop,
    inner: PiLoop,
    pump_gain: f64,
    v1: f64,
    v6: f64,
}

impl CascadedPi {
    /// `kp_in`/`ki_in` act on the flow error expressed in pump percent.
    /// Biases are the steady-state flow and pump command for `q0`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(kp_out: f64, ki_out: f64, kp_in: f64, ki_in: f64, v1: f64, v6: f64, q0: f64, p: &TankParams) -> Self {
        Self {
            outer: PiLoop::new(kp_out, ki_out, q0, 0.0, p.max_pump_flow(), p.dt),
            inner: PiLoop::new(kp_in, ki_in, q0 / p.pump_gain, 0.0, 100.0, p.dt),
            pump_gain: p.pump_gain,
            v1,
            v6,
        }
    }
}

impl Controller for CascadedPi {
    fn control(&mut self, meas: &Measurement, reference: &TankState) -> ControlInput {
        let flow_set = self.outer.update(reference.v4 - meas.volumes.v4);
        let pump = self.inner.update((flow_set - meas.pump_flow) / self.pump_gain);
        ControlInput::new(pump, self.v1, self.v6)
    }
}

/// Builds `R = diag(1, 10^x1, 10^x2)` and `Q = diag(10^x3, ..., 10^x8)`.
pub fn lqi_weights(exponents: &[f64; 8]) -> (DMatrix<f64>, DMatrix<f64>) {
    let r = DMatrix::from_diagonal(&DVector::from_vec(vec![
        1.0,
        10f64.powf(exponents[0]),
        10f64.powf(exponents[1]),
    ]));
    let q = DMatrix::from_diagonal(&DVector::from_iterator(6, exponents[2..].iter().map(|x| 10f64.powf(*x))));
    (q, r)
}

/// Augments `(A, B)` with integrators `z <- z + dt (s - s_ref)`.
pub fn integral_augmentation(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = b.ncols();
    let mut aa = DMatrix::zeros(2 * n, 2 * n);
    aa.view_mut((0, 0), (n, n)).copy_from(a);
    aa.view_mut((n, 0), (n, n)).copy_from(&(DMatrix::identity(n, n) * dt));
    aa.view_mut((n, n), (n, n)).copy_from(&DMatrix::identity(n, n));
    let mut ba = DMatrix::zeros(2 * n, m);
    ba.view_mut((0, 0), (n, m)).copy_from(b);
    (aa, ba)
}

/// LQR with integral action on all three volumes.
#[derive(Debug, Clone)]
pub struct Lqi {
    gain: DMatrix<f64>,
    u0: [f64; 3],
    integral: [f64; 3],
    dt: f64,
}

impl Lqi {
    /// Synthesizes the gain for the discretized model `(a, b)`. `u0` is the
    /// feed-forward input around which the feedback acts.
    pub fn synthesize(a: &DMatrix<f64>, b: &DMatrix<f64>, exponents: &[f64; 8], u0: ControlInput, dt: f64) -> Result<Self> {
        let (aa, ba) = integral_augmentation(a, b, dt);
        let (q, r) = lqi_weights(exponents);
        let DareSolution { k, .. } = solve_dare(&aa, &ba, &q, &r)?;
        Ok(Self {
            gain: k,
            u0: u0.to_array(),
            integral: [0.0; 3],
            dt,
        })
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }
}

impl Controller for Lqi {
    fn control(&mut self, meas: &Measurement, reference: &TankState) -> ControlInput {
        let err = [
            meas.volumes.v2 - reference.v2,
            meas.volumes.v3 - reference.v3,
            meas.volumes.v4 - reference.v4,
        ];
        let xi = DVector::from_iterator(6, err.iter().chain(&self.integral).copied());
        let du = &self.gain * xi;
        let unsat = [self.u0[0] - du[0], self.u0[1] - du[1], self.u0[2] - du[2]];
        // conditional integration: hold the integrators while any input saturates
        if unsat.iter().all(|u| (0.0..=100.0).contains(u)) {
            for (z, e) in self.integral.iter_mut().zip(err) {
                *z += self.dt * e;
            }
        }
        ControlInput::from_array(unsat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::tank::linearize_discretize;

    #[test]
    fn pi_anti_windup_freezes_integrator() {
        let mut pi = PiLoop::new(1.0, 1.0, 0.0, -1.0, 1.0, 0.1);
        for _ in 0..100 {
            assert_eq!(pi.update(5.0), 1.0);
        }
        assert!(pi.integral() <= 1.0);
        // recovers immediately once the error flips
        assert!(pi.update(-5.0) < 1.0);
    }

    #[test]
    fn pi_tracks_linear_combination() {
        let mut pi = PiLoop::new(2.0, 0.5, 1.0, -100.0, 100.0, 0.1);
        let u = pi.update(1.0);
        assert!((u - (1.0 + 2.0 + 0.05)).abs() < 1e-15);
    }

    #[test]
    fn lqi_weights_layout() {
        let (q, r) = lqi_weights(&[1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(r[(0, 0)], 1.0);
        assert!((r[(1, 1)] - 10.0).abs() < 1e-12);
        assert!((r[(2, 2)] - 0.1).abs() < 1e-12);
        assert!((q[(5, 5)] - 100.0).abs() < 1e-12);
        assert_eq!(q.nrows(), 6);
    }

    #[test]
    fn lqi_synthesis_stabilizes_the_linear_model() {
        let p = TankParams::calibrated();
        let (a, b) = linearize_discretize(&p);
        let ctrl = Lqi::synthesize(&a, &b, &[0.0; 8], ControlInput::new(50.0, 50.0, 50.0), p.dt).unwrap();
        let (aa, ba) = integral_augmentation(&a, &b, p.dt);
        let rho = crate::plant::dare::spectral_radius(&(aa - ba * ctrl.gain()));
        assert!(rho < 1.0);
    }
}
