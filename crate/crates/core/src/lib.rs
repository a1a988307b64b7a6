//! Crash-constraint-aware local Bayesian optimization.
//!
//! The optimizer learns a local gradient of an expensive black-box objective
//! from a Gaussian-process model, plans each batch of experiments to shrink the
//! uncertainty of that gradient, and takes lengthscale-normalized descent
//! steps. Evaluations that crash produce no value; they enter the model as
//! virtual observations with an adaptive penalty that pushes the gradient away
//! from them, and a crashed step resets the iterate to a known-feasible point.
//!
//! Modules:
//!
//! - [`domain`]: search box, unit-cube parameters, outcomes, datasets
//! - [`gp`]: GP posterior and gradient posterior with a Gaussian kernel
//! - [`acquisition`]: total-variance design of experiments
//! - [`crash_model`]: virtual observations for crashes
//! - [`optimizer`]: the tuning loop and a random-search baseline
//! - [`plant`]: simulated coupled-tank process, controllers, benchmark cases
//! - [`harness`]: seeded campaigns, JSON configs, CSV outputs

pub mod acquisition;
pub mod crash_model;
pub mod domain;
pub mod error;
pub mod gp;
pub mod harness;
pub mod optimizer;
pub mod plant;

pub use domain::{Dataset, EvalOutcome, ParamVector, SearchDomain};
pub use error::{Error, Result};
pub use gp::{GpHyperparams, GpModel, GradientBelief};
pub use optimizer::{run_gibo, run_random_search, GiboConfig, Objective, TuningRun};
