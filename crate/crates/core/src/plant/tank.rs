//! Coupled three-tank process.
//!
//! Water is pumped into B2, flows through valve V1 into B3, through a fixed
//! pipe into B4 and leaves through valve V6. Each connection follows a
//! Torricelli law (flow proportional to the square root of the level
//! difference), with coefficients calibrated so the operating point
//! `s_P = [8, 6, 5] l`, `a_P = [70.7, 43.3, 44.7] %` is an equilibrium.

use nalgebra::{DMatrix, SMatrix};

/// Operating-point volumes `[V2, V3, V4]` in liters.
pub const S_P: [f64; 3] = [8.0, 6.0, 5.0];
/// Operating-point inputs `[U_P, U_V1, U_V6]` in percent.
pub const A_P: [f64; 3] = [70.7, 43.3, 44.7];
/// Control period in seconds (10 Hz).
pub const DT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankState {
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
}

impl TankState {
    pub fn new(v2: f64, v3: f64, v4: f64) -> Self {
        Self { v2, v3, v4 }
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.v2, self.v3, self.v4]
    }

    fn clamped(self) -> Self {
        Self::new(self.v2.max(0.0), self.v3.max(0.0), self.v4.max(0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.v2.is_finite() && self.v3.is_finite() && self.v4.is_finite()
    }
}

/// Actuator commands in percent, saturated to `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    pub pump: f64,
    pub v1: f64,
    pub v6: f64,
}

impl ControlInput {
    pub fn new(pump: f64, v1: f64, v6: f64) -> Self {
        Self {
            pump: sat(pump),
            v1: sat(v1),
            v6: sat(v6),
        }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.pump, self.v1, self.v6]
    }
}

fn sat(u: f64) -> f64 {
    if u.is_nan() {
        0.0
    } else {
        u.clamp(0.0, 100.0)
    }
}

fn signed_sqrt(x: f64) -> f64 {
    x.signum() * x.abs().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankParams {
    /// l/s per percent of pump command.
    pub pump_gain: f64,
    /// V1 coefficient, l/s per sqrt(l) at 100 % opening.
    pub c_v1: f64,
    /// Fixed B3 -> B4 pipe, l/s per sqrt(l).
    pub c_34: f64,
    /// V6 coefficient, l/s per sqrt(l) at 100 % opening.
    pub c_v6: f64,
    pub dt: f64,
}

impl Default for TankParams {
    fn default() -> Self {
        Self::calibrated()
    }
}

/// Flows through the four connections, l/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flows {
    pub pump: f64,
    pub v1: f64,
    pub pipe_34: f64,
    pub v6: f64,
}

impl TankParams {
    /// Solves the equilibrium conditions at `(S_P, A_P)` with the pipe
    /// coefficient fixed to one, which makes the operating flow 1 l/s.
    pub fn calibrated() -> Self {
        let c_34 = 1.0;
        let q = c_34 * (S_P[1] - S_P[2]).sqrt();
        Self {
            pump_gain: q / A_P[0],
            c_v1: q / ((A_P[1] / 100.0) * (S_P[0] - S_P[1]).sqrt()),
            c_34,
            c_v6: q / ((A_P[2] / 100.0) * S_P[2].sqrt()),
            dt: DT,
        }
    }

    pub fn flows(&self, s: &TankState, a: &ControlInput) -> Flows {
        Flows {
            pump: self.pump_gain * a.pump,
            v1: self.c_v1 * (a.v1 / 100.0) * signed_sqrt(s.v2 - s.v3),
            pipe_34: self.c_34 * signed_sqrt(s.v3 - s.v4),
            v6: self.c_v6 * (a.v6 / 100.0) * s.v4.max(0.0).sqrt(),
        }
    }

    /// Pump flow at full command.
    pub fn max_pump_flow(&self) -> f64 {
        100.0 * self.pump_gain
    }

    /// Steady-state volumes for a pump command with both valves fixed.
    pub fn equilibrium_for_flow(&self, q: f64, v1: f64, v6: f64) -> TankState {
        let v4 = (q / (self.c_v6 * v6 / 100.0)).powi(2);
        let v3 = v4 + (q / self.c_34).powi(2);
        let v2 = v3 + (q / (self.c_v1 * v1 / 100.0)).powi(2);
        TankState::new(v2, v3, v4)
    }

    /// Throughput flow that holds `v4` at steady state with V6 at `v6` percent.
    pub fn flow_for_level(&self, v4: f64, v6: f64) -> f64 {
        self.c_v6 * (v6 / 100.0) * v4.max(0.0).sqrt()
    }

    /// Inputs that hold an arbitrary ordered state `v2 > v3 > v4 > 0` at rest.
    /// The throughput is fixed by the pipe; the valves and pump absorb the rest.
    pub fn equilibrium_input(&self, s: &TankState) -> ControlInput {
        let q = self.c_34 * signed_sqrt(s.v3 - s.v4);
        ControlInput {
            pump: q / self.pump_gain,
            v1: 100.0 * q / (self.c_v1 * signed_sqrt(s.v2 - s.v3)),
            v6: 100.0 * q / (self.c_v6 * s.v4.sqrt()),
        }
    }
}

/// Time derivative of the volumes, l/s.
pub fn dynamics(s: &TankState, a: &ControlInput, p: &TankParams) -> [f64; 3] {
    let f = p.flows(s, a);
    [f.pump - f.v1, f.v1 - f.pipe_34, f.pipe_34 - f.v6]
}

/// One classical fourth-order Runge-Kutta step of length `dt` with the input
/// held. Volumes are clamped at zero afterwards.
pub fn rk4_step(s: &TankState, a: &ControlInput, p: &TankParams, dt: f64) -> TankState {
    let add = |s: &TankState, k: &[f64; 3], h: f64| {
        TankState::new(s.v2 + h * k[0], s.v3 + h * k[1], s.v4 + h * k[2]).clamped()
    };
    let k1 = dynamics(s, a, p);
    let k2 = dynamics(&add(s, &k1, 0.5 * dt), a, p);
    let k3 = dynamics(&add(s, &k2, 0.5 * dt), a, p);
    let k4 = dynamics(&add(s, &k3, dt), a, p);
    let mut next = s.to_array();
    for i in 0..3 {
        next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    TankState::from_array(next).clamped()
}

/// Continuous Jacobians `(A_c, B_c)` at `(s, a)` by central differences.
pub fn jacobians_fd(s: &TankState, a: &ControlInput, p: &TankParams, step: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut ac = DMatrix::zeros(3, 3);
    let mut bc = DMatrix::zeros(3, 3);
    let base_s = s.to_array();
    let base_a = a.to_array();
    for j in 0..3 {
        let (mut sp, mut sm) = (base_s, base_s);
        sp[j] += step;
        sm[j] -= step;
        let fp = dynamics(&TankState::from_array(sp), a, p);
        let fm = dynamics(&TankState::from_array(sm), a, p);
        // inputs are not re-saturated here so the derivative is two-sided at the bounds
        let (mut up, mut um) = (base_a, base_a);
        up[j] += step;
        um[j] -= step;
        let gp = dynamics(s, &ControlInput { pump: up[0], v1: up[1], v6: up[2] }, p);
        let gm = dynamics(s, &ControlInput { pump: um[0], v1: um[1], v6: um[2] }, p);
        for i in 0..3 {
            ac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
            bc[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    (ac, bc)
}

/// Exact zero-order-hold discretization of `(A_c, B_c)` via the matrix
/// exponential of `[[A_c, B_c], [0, 0]] * dt`.
pub fn zoh(ac: &DMatrix<f64>, bc: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut m = SMatrix::<f64, 6, 6>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = ac[(i, j)] * dt;
            m[(i, j + 3)] = bc[(i, j)] * dt;
        }
    }
    let e = m.exp();
    let a = DMatrix::from_fn(3, 3, |i, j| e[(i, j)]);
    let b = DMatrix::from_fn(3, 3, |i, j| e[(i, j + 3)]);
    (a, b)
}

/// Discrete-time `(A, B)` of the model linearized at the operating point.
pub fn linearize_discretize(p: &TankParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let s = TankState::from_array(S_P);
    let a = ControlInput::from_array(A_P);
    let (ac, bc) = jacobians_fd(&s, &a, p, 1e-6);
    zoh(&ac, &bc, p.dt)
}
