//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Tolerances are fixed here.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use crashgibo::acquisition::{plan_doe, total_variance, total_variance_with_values};
use crashgibo::crash_model::augment;
use crashgibo::gp::{self, GpHyperparams, GpModel};
use crashgibo::harness::{quantile, run_campaign, Campaign, ExperimentConfig, OptimizerKind};
use crashgibo::optimizer::{run_gibo, GiboConfig, Objective};
use crashgibo::plant::tank::{self, A_P, DT, S_P};
use crashgibo::plant::{make_case, solve_dare, BenchmarkCase, ControlInput, TankParams, TankState};
use crashgibo::{Dataset, EvalOutcome, ParamVector, SearchDomain};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn random_point(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> ParamVector {
    ParamVector::new((0..d).map(|_| rng.random_range(lo..hi)).collect())
}

fn random_model(rng: &mut ChaCha8Rng, d: usize, n: usize) -> GpModel {
    let xs: Vec<ParamVector> = (0..n).map(|_| random_point(rng, d, 0.0, 1.0)).collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    gp::fit(&xs, &ys, &GpHyperparams::standard(d, 1e-3)).unwrap()
}

fn c1_gradient() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut models = 0;
    for d in [1, 2, 8] {
        for _ in 0..8 {
            let n = rng.random_range(3..15);
            let m = random_model(&mut rng, d, n);
            let x = random_point(&mut rng, d, 0.1, 0.9);
            let g = m.posterior_gradient(&x).mean;
            let h = 1e-5;
            let fd: Vec<f64> = (0..d)
                .map(|i| {
                    let mut p = x.coords().to_vec();
                    let mut q = p.clone();
                    p[i] += h;
                    q[i] -= h;
                    (m.posterior_mean(&ParamVector::new(p)) - m.posterior_mean(&ParamVector::new(q))) / (2.0 * h)
                })
                .collect();
            let scale = fd.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
            let err = g.iter().zip(&fd).fold(0.0f64, |a, (u, v)| a.max((u - v).abs())) / scale;
            worst = worst.max(err);
            models += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(worst <= 1e-5 && secs < 5.0, format!("{models} models, max rel err {worst:.2e}, {secs:.2}s"))
}

fn c2_pseudo_values() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = rng.random_range(1..=4);
        let n = rng.random_range(1..8);
        let m = random_model(&mut rng, d, n);
        let x = random_point(&mut rng, d, 0.0, 1.0);
        let b = rng.random_range(1..=d + 1);
        let batch: Vec<ParamVector> = (0..b).map(|_| random_point(&mut rng, d, 0.0, 1.0)).collect();
        let zero = total_variance_with_values(&m, &x, &batch, &vec![0.0; b]);
        let big = total_variance_with_values(&m, &x, &batch, &vec![1e6; b]);
        worst = worst.max((zero - big).abs()).max((zero - total_variance(&m, &x, &batch)).abs());
    }
    verdict(worst <= 1e-9, format!("100 configurations, max |diff| {worst:.2e}"))
}

fn c3_doe_quality() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for i in 0..10 {
        let d = 1 + i % 2;
        let n = rng.random_range(2..7);
        let m = random_model(&mut rng, d, n);
        let x = random_point(&mut rng, d, 0.0, 1.0);
        let b = d + 1;
        let plan = plan_doe(&m, &x, b, 8, i as u64);
        let oracle = (0..10_000)
            .map(|_| {
                let batch: Vec<ParamVector> = (0..b).map(|_| random_point(&mut rng, d, 0.0, 1.0)).collect();
                total_variance(&m, &x, &batch)
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(plan.achieved_total_variance / oracle);
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(worst <= 1.05 && secs < 30.0, format!("worst plan/oracle ratio {worst:.4}, {secs:.2}s"))
}

fn c4_repulsion() -> Verdict {
    let h = GpHyperparams::standard(1, 1e-2);
    let x_star = ParamVector::new(vec![0.5]);
    let mut positive = 0;
    let mut grads = Vec::new();
    for seed in 0..10u64 {
        let noise = Normal::new(0.0, 0.1).unwrap().sample(&mut ChaCha8Rng::seed_from_u64(seed));
        let ds = Dataset::new()
            .with_record(ParamVector::new(vec![0.4]), EvalOutcome::Success(1.0 + noise))
            .with_record(ParamVector::new(vec![0.6]), EvalOutcome::Crash);
        let g = augment(&ds, &x_star, 3.0, &h).unwrap().fit(&h).unwrap().posterior_gradient(&x_star).mean[0];
        positive += usize::from(g > 0.0);
        grads.push(g);
    }
    let min = grads.iter().cloned().fold(f64::INFINITY, f64::min);
    verdict(positive == 10, format!("{positive}/10 positive, min gradient {min:.4}"))
}

/// Bowl whose minimum sits beyond a deterministic crash wall at `x_1 = 0.8`.
struct CrashWall(SearchDomain);

impl Objective for CrashWall {
    fn domain(&self) -> &SearchDomain {
        &self.0
    }

    fn evaluate(&self, x: &[f64], _seed: u64) -> EvalOutcome {
        if x[0] > 0.8 {
            EvalOutcome::Crash
        } else {
            EvalOutcome::Success((x[0] - 0.95).powi(2) + (x[1] - 0.5).powi(2))
        }
    }
}

fn c5_feasible_returns() -> Verdict {
    let obj = CrashWall(SearchDomain::unit(2).unwrap());
    let (mut iterates, mut infeasible, mut resets, mut crashes) = (0, 0, 0, 0);
    for seed in 0..20 {
        let cfg = GiboConfig {
            max_evals: 40,
            seed,
            objective_scale: 0.1,
            ..GiboConfig::default()
        };
        let run = run_gibo(&obj, &[0.7, 0.3], &cfg).unwrap();
        for x in run.iterates.iter().chain(&run.final_x) {
            iterates += 1;
            infeasible += usize::from(obj.evaluate(x.coords(), 0).is_crash());
        }
        resets += run.resets.len();
        crashes += run.n_crashes();
    }
    verdict(
        infeasible == 0,
        format!("20 runs, {iterates} returned iterates, {infeasible} infeasible ({crashes} crashes, {resets} resets)"),
    )
}

fn campaign(case: &str, optimizer: OptimizerKind, budget: usize) -> Campaign {
    let mut cfg = ExperimentConfig::new(case, optimizer);
    cfg.budget = Some(budget);
    cfg.repeats = 10;
    run_campaign(&cfg).unwrap()
}

fn c6_parity() -> Verdict {
    let t = Instant::now();
    let g = campaign("pi_8l", OptimizerKind::Gibo, 49);
    let r = campaign("pi_8l", OptimizerKind::Random, 49);
    let secs = t.elapsed().as_secs_f64();
    let (mg, mr) = (g.summary.median_final(), r.summary.median_final());
    verdict(
        mg <= 1.1 * mr && secs < 120.0,
        format!("median RMSE gibo {mg:.4} vs random {mr:.4} (ratio {:.3}, limit 1.1), {secs:.1}s", mg / mr),
    )
}

fn c7_superiority() -> Verdict {
    let t = Instant::now();
    let g = campaign("lqi", OptimizerKind::Gibo, 72);
    let r = campaign("lqi", OptimizerKind::Random, 72);
    let secs = t.elapsed().as_secs_f64();
    let (mg, mr) = (g.summary.median_final(), r.summary.median_final());
    verdict(
        mg <= 0.9 * mr && secs < 600.0,
        format!("median MAE gibo {mg:.4} vs random {mr:.4} (ratio {:.3}, limit 0.9), {secs:.1}s", mg / mr),
    )
}

fn median_iterate(c: &Campaign) -> Vec<f64> {
    let xs: Vec<&ParamVector> = c.repeats.iter().map(|r| r.run.final_x.as_ref().unwrap()).collect();
    (0..xs[0].dim())
        .map(|i| quantile(&xs.iter().map(|x| x.coords()[i]).collect::<Vec<_>>(), 0.5))
        .collect()
}

fn noise_free(name: &str) -> BenchmarkCase {
    let mut c = make_case(name).unwrap();
    c.noise_std = 0.0;
    c
}

fn c8_optimum_shift() -> Verdict {
    let c8 = campaign("pi_8l", OptimizerKind::Gibo, 49);
    let c7 = campaign("pi_7l", OptimizerKind::Gibo, 49);
    let (m8, m7) = (median_iterate(&c8), median_iterate(&c7));
    let dist = m8.iter().zip(&m7).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / 0.25;
    let case = noise_free("pi_7l");
    let mut feasible = 0;
    for r in &c7.repeats {
        let x = r.run.final_x_raw().unwrap();
        let observed = r.run.final_objective().is_some();
        let clean = !crashgibo::plant::evaluate_case(&case, &x, 0).is_crash();
        feasible += usize::from(observed && clean);
    }
    verdict(
        dist >= 1.0 && feasible == c7.repeats.len(),
        format!(
            "median iterates 8l ({:.3}, {:.3}) 7l ({:.3}, {:.3}), distance {dist:.2} lengthscales; {feasible}/10 pi_7l finals feasible",
            m8[0], m8[1], m7[0], m7[1]
        ),
    )
}

fn c9_calibration() -> Verdict {
    let p = TankParams::calibrated();
    let s = TankState::from_array(S_P);
    let a = ControlInput::from_array(A_P);
    let rate = tank::dynamics(&s, &a, &p).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = s;
    let mut drift = 0.0f64;
    for _ in 0..(100.0 / DT).round() as usize {
        x = tank::rk4_step(&x, &a, &p, DT);
        drift = x.to_array().iter().zip(S_P).fold(drift, |m, (v, r)| m.max((v - r).abs()));
    }
    verdict(rate <= 1e-9 && drift < 1e-3, format!("|f(s_P, a_P)| {rate:.2e}, 100 s drift {drift:.2e} l"))
}

fn c10_dare() -> Verdict {
    let one = DMatrix::from_element(1, 1, 1.0);
    let p = solve_dare(&one, &one, &one, &one).unwrap().p[(0, 0)];
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    verdict((p - golden).abs() <= 1e-9, format!("P = {p:.15}, error {:.2e}", (p - golden).abs()))
}

fn c11_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, r#"{"case": "pi_7l", "repeats": 3, "budget": 25, "base_seed": 11}"#).unwrap();
    let mut files = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_tune"))
            .args(["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .output()
            .unwrap()
            .status;
        if !status.success() {
            return verdict(false, format!("tune run exited with {status}"));
        }
        files.push(["evals.csv", "summary.csv", "trace.dat"].map(|f| fs::read(out.join(f)).unwrap()));
    }
    let same = files[0] == files[1];
    verdict(same, format!("evals.csv, summary.csv, trace.dat {}", if same { "byte-identical" } else { "differ" }))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 11] = [
        ("GP gradient matches finite differences", c1_gradient),
        ("total variance independent of pseudo-values", c2_pseudo_values),
        ("DoE within 5% of random-batch oracle", c3_doe_quality),
        ("virtual point repels the gradient", c4_repulsion),
        ("returned iterates are feasible", c5_feasible_returns),
        ("pi_8l parity with random search", c6_parity),
        ("lqi at least 10% better than random search", c7_superiority),
        ("pi_7l optimum shifts away from pi_8l", c8_optimum_shift),
        ("plant calibration", c9_calibration),
        ("scalar DARE", c10_dare),
        ("byte-identical reruns", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += usize::from(!v.pass);
        println!("criterion {:>2} {} {name}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
