//! Seeded multi-repeat tuning campaigns.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, OptimizerKind};
use crate::error::{Error, Result};
use crate::optimizer::{mix_seed, run_gibo, run_random_search, Objective, TuningRun};
use crate::plant::{BenchmarkCase, CaseObjective};

/// Environment variable capping worker threads; `0` runs sequentially.
pub const THREADS_ENV: &str = "TUNE_THREADS";

/// Start draws that crash are redrawn at most this many times.
pub const MAX_START_DRAWS: usize = 1000;

const START_SALT: u64 = 0x0073_7461_7274;

#[derive(Debug, Clone)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    /// Starting point in raw units (GIBO only).
    pub x0: Option<Vec<f64>>,
    pub run: TuningRun,
}

impl RepeatResult {
    /// GIBO reports the objective at its final iterate, random search its best sample.
    pub fn final_objective(&self, optimizer: OptimizerKind) -> Option<f64> {
        match optimizer {
            OptimizerKind::Gibo => self.run.final_objective(),
            OptimizerKind::Random => self.run.best_objective(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSummary {
    pub case: String,
    pub optimizer: OptimizerKind,
    pub budget: usize,
    /// Per repeat; `None` if the repeat never saw a feasible evaluation.
    pub finals: Vec<Option<f64>>,
    pub final_x: Vec<Option<Vec<f64>>>,
    /// `best_so_far[r][k]`: best successful objective of repeat `r` after `k + 1` evaluations.
    pub best_so_far: Vec<Vec<Option<f64>>>,
    /// Per evaluation index, missing values counted as `+inf`.
    pub median_trace: Vec<f64>,
    pub q25_trace: Vec<f64>,
    pub q75_trace: Vec<f64>,
    pub crash_counts: Vec<usize>,
    pub wall_clock_secs: f64,
}

impl CampaignSummary {
    pub fn median_final(&self) -> f64 {
        quantile(&self.finals.iter().map(|f| f.unwrap_or(f64::INFINITY)).collect::<Vec<_>>(), 0.5)
    }

    pub fn total_crashes(&self) -> usize {
        self.crash_counts.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub config: ExperimentConfig,
    pub case: BenchmarkCase,
    pub repeats: Vec<RepeatResult>,
    pub summary: CampaignSummary,
}

/// Linear-interpolation quantile. Any infinite neighbour makes the result infinite.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    if lo == hi {
        return v[lo];
    }
    if v[lo].is_infinite() || v[hi].is_infinite() {
        return v[hi];
    }
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Threads requested through [`THREADS_ENV`]; `None` when unset or unparsable.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok()
}

/// Runs `f` on a pool honouring [`THREADS_ENV`]. `0` means one thread.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads_from_env() {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Draws a start uniformly from the case's start set, redrawing crashing
/// points from the same stream.
pub fn draw_start(objective: &CaseObjective, seed: u64) -> Result<Vec<f64>> {
    let set = &objective.case.start_set;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, START_SALT));
    for _ in 0..MAX_START_DRAWS {
        let x: Vec<f64> = set
            .lower()
            .iter()
            .zip(set.upper())
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect();
        if !objective.evaluate(&x, seed).is_crash() {
            return Ok(x);
        }
    }
    Err(Error::InitialPointCrashed)
}

fn run_repeat(cfg: &ExperimentConfig, objective: &CaseObjective, repeat: usize) -> Result<RepeatResult> {
    let seed = cfg.base_seed.wrapping_add(repeat as u64);
    let (x0, run) = match cfg.optimizer {
        OptimizerKind::Gibo => {
            let x0 = draw_start(objective, seed)?;
            let gcfg = cfg.gibo_config(&objective.case, seed)?;
            let run = run_gibo(objective, &x0, &gcfg)?;
            (Some(x0), run)
        }
        OptimizerKind::Random => (None, run_random_search(objective, cfg.effective_budget()?, seed)?),
    };
    Ok(RepeatResult { repeat, seed, x0, run })
}

/// Runs all repeats (in parallel, capped by [`THREADS_ENV`]) and aggregates them.
/// Outputs are identical for any thread count.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<Campaign> {
    cfg.validate()?;
    let case = cfg.benchmark_case()?;
    let objective = CaseObjective::new(case.clone());
    let started = Instant::now();
    let repeats = with_thread_cap(|| {
        (0..cfg.repeats)
            .into_par_iter()
            .map(|r| run_repeat(cfg, &objective, r))
            .collect::<Result<Vec<_>>>()
    })??;
    let summary = summarize(cfg, &repeats, started.elapsed().as_secs_f64())?;
    Ok(Campaign {
        config: cfg.clone(),
        case,
        repeats,
        summary,
    })
}

fn summarize(cfg: &ExperimentConfig, repeats: &[RepeatResult], secs: f64) -> Result<CampaignSummary> {
    let budget = cfg.effective_budget()?;
    let best_so_far: Vec<Vec<Option<f64>>> = repeats.iter().map(|r| r.run.best_so_far()).collect();
    let len = best_so_far.iter().map(Vec::len).max().unwrap_or(0);
    let column = |k: usize| -> Vec<f64> {
        best_so_far
            .iter()
            // a shorter run keeps its last value
            .map(|t| t.get(k).or(t.last()).copied().flatten().unwrap_or(f64::INFINITY))
            .collect()
    };
    let trace = |q: f64| -> Vec<f64> { (0..len).map(|k| quantile(&column(k), q)).collect() };
    Ok(CampaignSummary {
        case: cfg.case.clone(),
        optimizer: cfg.optimizer,
        budget,
        finals: repeats.iter().map(|r| r.final_objective(cfg.optimizer)).collect(),
        final_x: repeats.iter().map(|r| r.run.final_x_raw()).collect(),
        median_trace: trace(0.5),
        q25_trace: trace(0.25),
        q75_trace: trace(0.75),
        best_so_far,
        crash_counts: repeats.iter().map(|r| r.run.n_crashes()).collect(),
        wall_clock_secs: secs,
    })
}
