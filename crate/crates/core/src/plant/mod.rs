//! Simulated coupled-tank process and the controller-tuning benchmark.
//!
//! Three tanks in series: a pump fills B2, valve V1 drains B2 into B3, a fixed
//! pipe connects B3 to B4 and valve V6 drains B4. The states are the volumes
//! `V2, V3, V4` in liters and the inputs are `U_P, U_V1, U_V6` in percent.

pub mod cases;
pub mod control;
pub mod dare;
pub mod episode;
pub mod tank;

pub use cases::{make_case, BenchmarkCase, CaseKind, CaseObjective, ObjectiveKind, CASE_NAMES};
pub use control::{CascadedPi, Controller, Lqi, Measurement, PiLoop};
pub use dare::{solve_dare, DareSolution};
pub use episode::{evaluate_case, objective_mae, objective_rmse, run_episode, ControllerSpec, EpisodeResult, Sample};
pub use tank::{dynamics, linearize_discretize, ControlInput, TankParams, TankState};
