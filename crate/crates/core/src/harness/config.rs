//! Strict JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::GiboConfig;
use crate::plant::{make_case, BenchmarkCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Gibo,
    Random,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gibo => "gibo",
            Self::Random => "random",
        }
    }
}

/// Optional replacements for the optimizer defaults. Budget and seed come
/// from the experiment; the objective scale defaults to the case's.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GiboOverrides {
    pub batch_size: Option<usize>,
    pub eta_max: Option<f64>,
    pub eta_min: Option<f64>,
    pub beta: Option<f64>,
    pub n_iterations: Option<usize>,
    pub objective_scale: Option<f64>,
    pub optimize_noise: Option<bool>,
    pub noise_variance: Option<f64>,
    pub lengthscale: Option<f64>,
    pub signal_variance: Option<f64>,
    pub prior_mean: Option<f64>,
    pub n_starts: Option<usize>,
}

fn default_repeats() -> usize {
    10
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: String,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    /// Evaluations per repeat; the case default when absent.
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub gibo: GiboOverrides,
    /// Measurement noise of the episodes; the case default when absent.
    #[serde(default)]
    pub noise_std: Option<f64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Gibo
}

impl ExperimentConfig {
    pub fn new(case: &str, optimizer: OptimizerKind) -> Self {
        Self {
            case: case.to_string(),
            optimizer,
            budget: None,
            repeats: default_repeats(),
            base_seed: 0,
            gibo: GiboOverrides::default(),
            noise_std: None,
            out: default_out(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Every failure, including a missing
    /// file, is reported as a config error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The case with config-level changes applied.
    pub fn benchmark_case(&self) -> Result<BenchmarkCase> {
        let mut case = make_case(&self.case)?;
        if let Some(s) = self.noise_std {
            case.noise_std = s;
        }
        Ok(case)
    }

    pub fn effective_budget(&self) -> Result<usize> {
        Ok(match self.budget {
            Some(b) => b,
            None => make_case(&self.case)?.default_budget,
        })
    }

    /// Optimizer settings for one repeat.
    pub fn gibo_config(&self, case: &BenchmarkCase, seed: u64) -> Result<GiboConfig> {
        let o = &self.gibo;
        let d = GiboConfig::default();
        Ok(GiboConfig {
            batch_size: o.batch_size.or(d.batch_size),
            eta_max: o.eta_max.unwrap_or(d.eta_max),
            eta_min: o.eta_min.unwrap_or(d.eta_min),
            max_evals: self.effective_budget()?,
            beta: o.beta.unwrap_or(d.beta),
            n_iterations: o.n_iterations.or(d.n_iterations),
            seed,
            objective_scale: o.objective_scale.unwrap_or(case.objective_scale),
            optimize_noise: o.optimize_noise.unwrap_or(d.optimize_noise),
            noise_variance: o.noise_variance.unwrap_or(d.noise_variance),
            lengthscale: o.lengthscale.unwrap_or(d.lengthscale),
            signal_variance: o.signal_variance.unwrap_or(d.signal_variance),
            prior_mean: o.prior_mean.unwrap_or(d.prior_mean),
            n_starts: o.n_starts.unwrap_or(d.n_starts),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let case = self.benchmark_case()?;
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if let Some(s) = self.noise_std {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig("noise_std must be finite and non-negative".into()));
            }
        }
        let budget = self.effective_budget()?;
        match self.optimizer {
            OptimizerKind::Random if budget == 0 => Err(Error::InvalidConfig("budget must be at least 1".into())),
            OptimizerKind::Random => Ok(()),
            OptimizerKind::Gibo => self.gibo_config(&case, self.base_seed)?.validate(case.dim()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"case": "pi_8l"}"#).unwrap();
        assert_eq!(cfg.optimizer, OptimizerKind::Gibo);
        assert_eq!(cfg.repeats, 10);
        assert_eq!(cfg.base_seed, 0);
        assert_eq!(cfg.effective_budget().unwrap(), make_case("pi_8l").unwrap().default_budget);
        let case = cfg.benchmark_case().unwrap();
        let g = cfg.gibo_config(&case, 4).unwrap();
        assert_eq!(g.seed, 4);
        assert_eq!(g.objective_scale, case.objective_scale);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"case": "pi_8l", "repeat": 3}"#),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"case": "pi_8l", "gibo": {"eta": 0.1}}"#),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            r#"{"case": "mpc_ekf"}"#,
            r#"{"case": "pi_8l", "repeats": 0}"#,
            r#"{"case": "pi_8l", "budget": 4}"#,
            r#"{"case": "pi_8l", "optimizer": "random", "budget": 0}"#,
            r#"{"case": "pi_8l", "optimizer": "annealing"}"#,
            r#"{"case": "pi_8l", "gibo": {"eta_min": 0.5}}"#,
            r#"{"case": "pi_8l", "noise_std": -1.0}"#,
            r#"{"case": 3}"#,
            "not json",
        ] {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn overrides_apply() {
        let cfg = ExperimentConfig::from_json(
            r#"{"case": "lqi", "optimizer": "random", "budget": 12, "repeats": 2, "base_seed": 7,
                "gibo": {"beta": 2.0, "objective_scale": 3.0}, "noise_std": 0.0, "out": "x"}"#,
        )
        .unwrap();
        assert_eq!(cfg.effective_budget().unwrap(), 12);
        let case = cfg.benchmark_case().unwrap();
        assert_eq!(case.noise_std, 0.0);
        let g = cfg.gibo_config(&case, 0).unwrap();
        assert_eq!((g.beta, g.objective_scale, g.max_evals), (2.0, 3.0, 12));
        assert_eq!(cfg.out, PathBuf::from("x"));
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::new("pi_7l", OptimizerKind::Random);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }
}
