//! Search space, evaluation outcomes and the optimizer's dataset.
//!
//! Everything the optimizer does happens on the unit cube `[0, 1]^d`.
//! Raw parameter units only show up at the objective boundary, via
//! [`SearchDomain::normalize`] and [`SearchDomain::denormalize`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `lower <= x <= upper` in raw parameter units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidDomain(format!(
                    "bound {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Unit cube of dimension `d`.
    pub fn unit(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d], vec![1.0; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Maps raw coordinates into the unit cube, clipping anything outside the box.
    pub fn normalize(&self, x_raw: &[f64]) -> Result<ParamVector> {
        if x_raw.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x_raw.len(),
            });
        }
        let coords = x_raw
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (lo, hi))| (x - lo) / (hi - lo))
            .collect();
        Ok(ParamVector::new(coords))
    }

    pub fn denormalize(&self, x: &ParamVector) -> Vec<f64> {
        x.coords()
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(u, (lo, hi))| lo + u * (hi - lo))
            .collect()
    }
}

/// A point of the unit cube. Coordinates are clipped to `[0, 1]` on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(
            coords
                .into_iter()
                .map(|c| if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) })
                .collect(),
        )
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self::new(v)
    }
}

/// Result of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EvalOutcome {
    Success(f64),
    Crash,
}

impl EvalOutcome {
    /// Builds an outcome, mapping non-finite values to [`EvalOutcome::Crash`].
    pub fn from_value(y: f64) -> Self {
        if y.is_finite() {
            Self::Success(y)
        } else {
            Self::Crash
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Success(y) => Some(*y),
            Self::Crash => None,
        }
    }

    pub fn is_crash(&self) -> bool {
        matches!(self, Self::Crash)
    }
}

/// Successful observations `(X, y)` plus crash locations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<ParamVector>,
    y: Vec<f64>,
    crashes: Vec<ParamVector>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_observations(x: Vec<ParamVector>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        Ok(Self {
            x,
            y,
            crashes: Vec::new(),
        })
    }

    /// Appends one evaluation: successes go to `(X, y)`, crashes to the crash list.
    pub fn record(&mut self, x: ParamVector, outcome: EvalOutcome) {
        match outcome {
            EvalOutcome::Success(y) => {
                self.x.push(x);
                self.y.push(y);
            }
            EvalOutcome::Crash => self.crashes.push(x),
        }
    }

    /// Value-returning form of [`Dataset::record`].
    pub fn with_record(mut self, x: ParamVector, outcome: EvalOutcome) -> Self {
        self.record(x, outcome);
        self
    }

    pub fn x(&self) -> &[ParamVector] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn crashes(&self) -> &[ParamVector] {
        &self.crashes
    }

    pub fn n_feasible(&self) -> usize {
        self.x.len()
    }

    pub fn n_crashes(&self) -> usize {
        self.crashes.len()
    }

    /// Total number of records, successes and crashes.
    pub fn len(&self) -> usize {
        self.x.len() + self.crashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
