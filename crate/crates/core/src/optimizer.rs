//! The crash-aware local BO loop and the random-search baseline.
//!
//! One iteration of [`Gibo`]:
//!
//! 1. plan `b` evaluations that minimize the gradient total variance at `x*`,
//! 2. evaluate them and record successes and crashes,
//! 3. rebuild the augmented dataset (crashes become virtual points) and refit,
//! 4. take a lengthscale-normalized gradient step from `x*`,
//! 5. evaluate the candidate; if it crashes, reset `x*` to the evaluated
//!    feasible point with the lowest posterior mean.
//!
//! Budgets count every evaluation, crashed or not.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{self, DEFAULT_N_STARTS};
use crate::crash_model::{self, DEFAULT_BETA};
use crate::domain::{Dataset, EvalOutcome, ParamVector, SearchDomain};
use crate::error::{Error, Result};
use crate::gp::{self, GpHyperparams, GpModel};

/// Gradient norms at or below this are treated as zero.
pub const STALL_TOLERANCE: f64 = 1e-12;

/// A black-box objective over a box domain. Crashes are reported, not raised.
pub trait Objective: Sync {
    fn domain(&self) -> &SearchDomain;

    /// Evaluates at raw coordinates. Must be deterministic for a given `seed`.
    fn evaluate(&self, x_raw: &[f64], seed: u64) -> EvalOutcome;
}

/// Tuning knobs for [`run_gibo`]. Defaults follow the benchmark hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GiboConfig {
    /// Evaluations per DoE batch; `None` means `d + 1`.
    pub batch_size: Option<usize>,
    pub eta_max: f64,
    pub eta_min: f64,
    /// Total evaluation budget `K`, crashes included.
    pub max_evals: usize,
    pub beta: f64,
    /// Horizon of the cosine step schedule; `None` derives it from the budget.
    pub n_iterations: Option<usize>,
    pub seed: u64,
    /// Objective values are divided by this before entering the GP.
    pub objective_scale: f64,
    pub optimize_noise: bool,
    /// Initial `sigma_n^2` in scaled objective units.
    pub noise_variance: f64,
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub prior_mean: f64,
    pub n_starts: usize,
}

impl Default for GiboConfig {
    fn default() -> Self {
        Self {
            batch_size: None,
            eta_max: 0.25,
            eta_min: 0.125,
            max_evals: 33,
            beta: DEFAULT_BETA,
            n_iterations: None,
            seed: 0,
            objective_scale: 1.0,
            optimize_noise: true,
            noise_variance: 1e-3,
            lengthscale: 0.25,
            signal_variance: 0.5,
            prior_mean: 1.0,
            n_starts: DEFAULT_N_STARTS,
        }
    }
}

impl GiboConfig {
    pub fn batch_size_for(&self, d: usize) -> usize {
        self.batch_size.unwrap_or(d + 1)
    }

    /// `ceil((K - 1) / (b + 1))`, unless set explicitly.
    pub fn iterations_for(&self, d: usize) -> usize {
        self.n_iterations.unwrap_or_else(|| {
            let per_iter = self.batch_size_for(d) + 1;
            (self.max_evals.saturating_sub(1)).div_ceil(per_iter).max(1)
        })
    }

    pub fn hyperparams(&self, d: usize) -> GpHyperparams {
        GpHyperparams {
            lengthscales: vec![self.lengthscale; d],
            signal_variance: self.signal_variance,
            noise_variance: self.noise_variance,
            prior_mean: self.prior_mean,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let b = self.batch_size_for(d);
        if b < 1 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.eta_min > 0.0 && self.eta_min <= self.eta_max) {
            return Err(Error::InvalidConfig("need 0 < eta_min <= eta_max".into()));
        }
        if self.max_evals < b + 2 {
            return Err(Error::InvalidConfig(format!(
                "budget {} too small for one iteration (need at least {})",
                self.max_evals,
                b + 2
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidConfig("beta must be positive".into()));
        }
        if !(self.objective_scale > 0.0) {
            return Err(Error::InvalidConfig("objective_scale must be positive".into()));
        }
        self.hyperparams(d).validate()
    }
}

/// `eta_min + (eta_max - eta_min) (1 + cos(pi k / K)) / 2`.
pub fn cosine_eta(k: usize, horizon: usize, eta_max: f64, eta_min: f64) -> f64 {
    let horizon = horizon.max(1);
    let t = (k.min(horizon) as f64) / horizon as f64;
    eta_min + 0.5 * (eta_max - eta_min) * (1.0 + (std::f64::consts::PI * t).cos())
}

/// Step length that makes `|| L^-1 eta g || = eta_hat`. Returns 0 for a
/// vanishing gradient.
pub fn step_size(eta_hat: f64, grad_mean: &[f64], h: &GpHyperparams) -> f64 {
    let norm = grad_mean.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm <= STALL_TOLERANCE {
        return 0.0;
    }
    let scaled: f64 = grad_mean
        .iter()
        .zip(&h.lengthscales)
        .map(|(g, l)| (g / l).powi(2))
        .sum();
    eta_hat / scaled.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalKind {
    Init,
    Doe,
    StepCandidate,
    Random,
}

impl EvalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Init => "init",
            Self::Doe => "doe",
            Self::StepCandidate => "step",
            Self::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "init" => Self::Init,
            "doe" => Self::Doe,
            "step" => Self::StepCandidate,
            "random" => Self::Random,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub x: ParamVector,
    pub x_raw: Vec<f64>,
    /// Raw (unscaled) outcome.
    pub outcome: EvalOutcome,
    pub iteration: usize,
    pub kind: EvalKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reset {
    pub iteration: usize,
    /// The crashed step candidate.
    pub from: ParamVector,
    pub target: ParamVector,
}

/// Full audit trail of one tuning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRun {
    pub domain: SearchDomain,
    pub evaluations: Vec<EvalRecord>,
    /// `x*` after initialization and after every completed iteration.
    pub iterates: Vec<ParamVector>,
    pub resets: Vec<Reset>,
    /// Iterations where the gradient vanished and no step was taken.
    pub stalls: Vec<usize>,
    /// Best successful `(x, y)` so far, one entry per evaluation.
    pub best_feasible: Vec<Option<(ParamVector, f64)>>,
    /// Returned parameter: the final iterate for GIBO, the best sample for random search.
    pub final_x: Option<ParamVector>,
}

impl TuningRun {
    fn new(domain: SearchDomain) -> Self {
        Self {
            domain,
            evaluations: Vec::new(),
            iterates: Vec::new(),
            resets: Vec::new(),
            stalls: Vec::new(),
            best_feasible: Vec::new(),
            final_x: None,
        }
    }

    fn push(&mut self, rec: EvalRecord) {
        let prev = self.best_feasible.last().cloned().flatten();
        let best = match (prev, rec.outcome.value()) {
            (Some((_, by)), Some(y)) if y < by => Some((rec.x.clone(), y)),
            (None, Some(y)) => Some((rec.x.clone(), y)),
            (prev, _) => prev,
        };
        self.best_feasible.push(best);
        self.evaluations.push(rec);
    }

    pub fn n_evals(&self) -> usize {
        self.evaluations.len()
    }

    pub fn n_crashes(&self) -> usize {
        self.evaluations.iter().filter(|e| e.outcome.is_crash()).count()
    }

    pub fn best_objective(&self) -> Option<f64> {
        self.best_feasible.last().cloned().flatten().map(|(_, y)| y)
    }

    /// Running minimum of successful objective values, `None` until the first success.
    pub fn best_so_far(&self) -> Vec<Option<f64>> {
        self.best_feasible.iter().map(|b| b.as_ref().map(|(_, y)| *y)).collect()
    }

    /// Observed objective at `final_x`: the most recent successful evaluation there.
    pub fn final_objective(&self) -> Option<f64> {
        let x = self.final_x.as_ref()?;
        self.evaluations
            .iter()
            .rev()
            .find(|e| &e.x == x && !e.outcome.is_crash())
            .and_then(|e| e.outcome.value())
    }

    pub fn final_x_raw(&self) -> Option<Vec<f64>> {
        self.final_x.as_ref().map(|x| self.domain.denormalize(x))
    }
}

/// splitmix64 finalizer, used to derive independent seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const EVAL_SALT: u64 = 0x6576_616c;
const DOE_SALT: u64 = 0x646f_6500;

/// Loop state for one CRaSH-GIBO run.
pub struct Gibo<'a, O: Objective + ?Sized> {
    objective: &'a O,
    cfg: GiboConfig,
    hyper: GpHyperparams,
    dataset: Dataset,
    x_star: ParamVector,
    iteration: usize,
    batch_size: usize,
    horizon: usize,
    run: TuningRun,
}

impl<'a, O: Objective + ?Sized> Gibo<'a, O> {
    /// Evaluates `x0_raw` and sets up the loop. Fails if `x0` crashes.
    pub fn start(objective: &'a O, x0_raw: &[f64], cfg: GiboConfig) -> Result<Self> {
        let domain = objective.domain().clone();
        let d = domain.dim();
        cfg.validate(d)?;
        let x0 = domain.normalize(x0_raw)?;
        let mut gibo = Self {
            objective,
            hyper: cfg.hyperparams(d),
            batch_size: cfg.batch_size_for(d),
            horizon: cfg.iterations_for(d),
            cfg,
            dataset: Dataset::new(),
            x_star: x0.clone(),
            iteration: 0,
            run: TuningRun::new(domain),
        };
        let out = gibo.evaluate(std::slice::from_ref(&x0), EvalKind::Init)[0];
        if out.is_crash() {
            return Err(Error::InitialPointCrashed);
        }
        gibo.run.iterates.push(x0.clone());
        gibo.run.final_x = Some(x0);
        Ok(gibo)
    }

    pub fn x_star(&self) -> &ParamVector {
        &self.x_star
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn hyper(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn run(&self) -> &TuningRun {
        &self.run
    }

    pub fn budget_left(&self) -> usize {
        self.cfg.max_evals.saturating_sub(self.run.n_evals())
    }

    pub fn is_done(&self) -> bool {
        self.budget_left() == 0
    }

    /// Evaluates the points concurrently and commits the results in order.
    fn evaluate(&mut self, points: &[ParamVector], kind: EvalKind) -> Vec<EvalOutcome> {
        let domain = self.run.domain.clone();
        let base = self.run.n_evals() as u64;
        let seed = self.cfg.seed;
        let objective = self.objective;
        let raws: Vec<Vec<f64>> = points.iter().map(|p| domain.denormalize(p)).collect();
        let outcomes: Vec<EvalOutcome> = raws
            .par_iter()
            .enumerate()
            .map(|(i, raw)| objective.evaluate(raw, mix_seed(seed ^ EVAL_SALT, base + i as u64)))
            .collect();
        for ((p, raw), out) in points.iter().zip(raws).zip(&outcomes) {
            let scaled = match out {
                EvalOutcome::Success(y) => EvalOutcome::Success(y / self.cfg.objective_scale),
                EvalOutcome::Crash => EvalOutcome::Crash,
            };
            self.dataset.record(p.clone(), scaled);
            self.run.push(EvalRecord {
                x: p.clone(),
                x_raw: raw,
                outcome: *out,
                iteration: self.iteration,
                kind,
            });
        }
        outcomes
    }

    /// GP fitted on the augmented dataset built around the current iterate.
    pub fn augmented_model(&self) -> Result<GpModel> {
        crash_model::augment(&self.dataset, &self.x_star, self.cfg.beta, &self.hyper)?.fit(&self.hyper)
    }

    /// Runs one iteration. Returns `Ok(false)` once the budget is exhausted.
    pub fn step(&mut self) -> Result<bool> {
        if self.is_done() {
            return Ok(false);
        }
        let model = self.augmented_model()?;
        let plan = acquisition::plan_doe(
            &model,
            &self.x_star,
            self.batch_size,
            self.cfg.n_starts,
            mix_seed(self.cfg.seed ^ DOE_SALT, self.iteration as u64),
        );
        let n = plan.batch.len().min(self.budget_left());
        self.evaluate(&plan.batch[..n], EvalKind::Doe);
        if self.is_done() {
            return Ok(false);
        }

        let model = self.augmented_model()?;
        let grad = model.posterior_gradient(&self.x_star).mean;
        let eta_hat = cosine_eta(self.iteration, self.horizon, self.cfg.eta_max, self.cfg.eta_min);
        let eta = step_size(eta_hat, grad.as_slice(), &self.hyper);
        if eta == 0.0 {
            self.run.stalls.push(self.iteration);
        } else {
            let cand = ParamVector::new(
                self.x_star
                    .coords()
                    .iter()
                    .zip(grad.iter())
                    .map(|(x, g)| x - eta * g)
                    .collect(),
            );
            let out = self.evaluate(std::slice::from_ref(&cand), EvalKind::StepCandidate)[0];
            if out.is_crash() {
                let target = self.reset_target()?;
                self.run.resets.push(Reset {
                    iteration: self.iteration,
                    from: cand,
                    target: target.clone(),
                });
                self.x_star = target;
            } else {
                self.x_star = cand;
            }
        }

        if self.cfg.optimize_noise {
            self.hyper = gp::fit_noise(&self.dataset, &self.hyper);
        }
        self.run.iterates.push(self.x_star.clone());
        self.run.final_x = Some(self.x_star.clone());
        self.iteration += 1;
        Ok(!self.is_done())
    }

    /// Evaluated feasible location with the lowest posterior mean under the
    /// augmented model (virtual values anchored at the pre-step iterate).
    pub fn reset_target(&self) -> Result<ParamVector> {
        let model = self.augmented_model()?;
        reset_target(&model, self.dataset.x())
    }

    pub fn finish(self) -> TuningRun {
        self.run
    }
}

/// `argmin_{x in feasible} mu(x)`, first index on ties.
pub fn reset_target(model: &GpModel, feasible: &[ParamVector]) -> Result<ParamVector> {
    feasible
        .iter()
        .map(|x| (x, model.posterior_mean(x)))
        .fold(None::<(&ParamVector, f64)>, |best, (x, mu)| match best {
            Some((_, b)) if b <= mu => best,
            _ => Some((x, mu)),
        })
        .map(|(x, _)| x.clone())
        .ok_or(Error::InitialPointCrashed)
}

/// Runs CRaSH-GIBO from `x0_raw` until `cfg.max_evals` evaluations are spent.
pub fn run_gibo<O: Objective + ?Sized>(objective: &O, x0_raw: &[f64], cfg: &GiboConfig) -> Result<TuningRun> {
    let mut gibo = Gibo::start(objective, x0_raw, cfg.clone())?;
    while gibo.step()? {}
    Ok(gibo.finish())
}

/// Uniform random search with `budget` evaluations; returns the best feasible sample.
/// If every sample crashes the run has `final_x == None`.
pub fn run_random_search<O: Objective + ?Sized>(objective: &O, budget: usize, seed: u64) -> Result<TuningRun> {
    if budget == 0 {
        return Err(Error::InvalidConfig("random search budget must be at least 1".into()));
    }
    let domain = objective.domain().clone();
    let d = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<ParamVector> = (0..budget)
        .map(|_| ParamVector::new((0..d).map(|_| rng.random::<f64>()).collect()))
        .collect();
    let outcomes: Vec<EvalOutcome> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| objective.evaluate(&domain.denormalize(p), mix_seed(seed ^ EVAL_SALT, i as u64)))
        .collect();
    let mut run = TuningRun::new(domain.clone());
    for (i, (p, out)) in points.into_iter().zip(outcomes).enumerate() {
        run.push(EvalRecord {
            x_raw: domain.denormalize(&p),
            x: p,
            outcome: out,
            iteration: i,
            kind: EvalKind::Random,
        });
    }
    run.final_x = run.best_feasible.last().cloned().flatten().map(|(x, _)| x);
    Ok(run)
}
