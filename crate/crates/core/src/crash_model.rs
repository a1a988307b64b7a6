//! Virtual observations for crashed evaluations.
//!
//! A crash yields no objective value, so each crash location `x_hat` gets a
//! synthetic value from the feasible-only posterior:
//!
//! ```text
//! y_hat = max(mu(x_hat), mu(x*)) + beta * sqrt(var(x_hat))
//! ```
//!
//! The `max` keeps every virtual value above the posterior mean at the current
//! iterate, so the surrogate always slopes upward from `x*` toward a crash.

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, ParamVector};
use crate::error::Result;
use crate::gp::{self, GpHyperparams, GpModel};

pub const DEFAULT_BETA: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualPoint {
    pub x: ParamVector,
    pub y_hat: f64,
}

/// Feasible observations followed by the virtual ones.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    pub x_all: Vec<ParamVector>,
    pub y_all: Vec<f64>,
    pub n_feasible: usize,
}

impl AugmentedDataset {
    pub fn len(&self) -> usize {
        self.x_all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_all.is_empty()
    }

    pub fn n_virtual(&self) -> usize {
        self.x_all.len() - self.n_feasible
    }

    pub fn virtual_points(&self) -> impl Iterator<Item = VirtualPoint> + '_ {
        self.x_all[self.n_feasible..]
            .iter()
            .zip(&self.y_all[self.n_feasible..])
            .map(|(x, y)| VirtualPoint {
                x: x.clone(),
                y_hat: *y,
            })
    }

    /// Fits a GP to the augmented data.
    pub fn fit(&self, h: &GpHyperparams) -> Result<GpModel> {
        gp::fit(&self.x_all, &self.y_all, h)
    }
}

/// Adaptive penalty for one crash location, from a model fitted on feasible data only.
pub fn virtual_value(feasible: &GpModel, x_hat: &ParamVector, x_star: &ParamVector, beta: f64) -> f64 {
    let (mu_hat, var_hat) = feasible.posterior(x_hat);
    let mu_star = feasible.posterior_mean(x_star);
    mu_hat.max(mu_star) + beta * var_hat.sqrt()
}

/// Builds the augmented dataset. Every virtual value comes from the same
/// feasible-only model, so the result does not depend on crash order.
pub fn augment(ds: &Dataset, x_star: &ParamVector, beta: f64, h: &GpHyperparams) -> Result<AugmentedDataset> {
    let mut x_all = ds.x().to_vec();
    let mut y_all = ds.y().to_vec();
    if ds.n_crashes() > 0 {
        let feasible = gp::fit_feasible(ds, h)?;
        for x_hat in ds.crashes() {
            x_all.push(x_hat.clone());
            y_all.push(virtual_value(&feasible, x_hat, x_star, beta));
        }
    }
    Ok(AugmentedDataset {
        x_all,
        y_all,
        n_feasible: ds.n_feasible(),
    })
}
