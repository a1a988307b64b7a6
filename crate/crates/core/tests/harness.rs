use std::fs;
use std::path::Path;
use std::process::Command;

use crashgibo::harness::{read_evals, run_campaign, write_outputs, ExperimentConfig, OptimizerKind};

fn config(case: &str, optimizer: OptimizerKind, budget: usize, repeats: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(case, optimizer);
    cfg.budget = Some(budget);
    cfg.repeats = repeats;
    cfg
}

fn tune(args: &[&str], threads: &str) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tune"))
        .args(args)
        .env("TUNE_THREADS", threads)
        .output()
        .expect("tune runs")
}

#[test]
fn random_budget_gives_exact_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let c = run_campaign(&config("pi_8l", OptimizerKind::Random, 10, 1)).unwrap();
    write_outputs(&c, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("evals.csv")).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.starts_with("repeat,eval_index,iteration,kind,x_1,x_2,outcome,objective,best_so_far\n"));
}

#[test]
fn gibo_rows_cover_the_budget() {
    let dir = tempfile::tempdir().unwrap();
    let c = run_campaign(&config("pi_7l", OptimizerKind::Gibo, 16, 2)).unwrap();
    write_outputs(&c, dir.path()).unwrap();
    let rows = read_evals(&dir.path().join("evals.csv")).unwrap();
    assert_eq!(rows.len(), 32);
    assert_eq!(rows[0].kind.as_str(), "init");
    assert!(rows.iter().filter(|r| r.repeat == 1).map(|r| r.eval_index).eq(1..=16));
}

/// Running minimum recomputed from the raw text, without the library parser.
fn check_best_so_far(text: &str) -> usize {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (rep, out, obj, best) = (col("repeat"), col("outcome"), col("objective"), col("best_so_far"));
    let mut crashes = 0;
    let mut current: Option<(String, f64)> = None;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if current.as_ref().is_none_or(|(r, _)| r != f[rep]) {
            current = Some((f[rep].to_string(), f64::INFINITY));
        }
        let run_min = &mut current.as_mut().unwrap().1;
        match f[out] {
            "crash" => {
                assert_eq!(f[obj], "", "crash rows carry no objective");
                crashes += 1;
            }
            "success" => *run_min = run_min.min(f[obj].parse().unwrap()),
            other => panic!("unexpected outcome {other}"),
        }
        if run_min.is_finite() {
            assert_eq!(f[best].parse::<f64>().unwrap(), *run_min);
        } else {
            assert_eq!(f[best], "");
        }
    }
    crashes
}

#[test]
fn crash_rows_and_running_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let c = run_campaign(&config("lqi", OptimizerKind::Random, 12, 2)).unwrap();
    write_outputs(&c, dir.path()).unwrap();
    let crashes = check_best_so_far(&fs::read_to_string(dir.path().join("evals.csv")).unwrap());
    assert!(crashes > 0, "lqi random search should hit the overflow region");
    assert_eq!(crashes, c.summary.total_crashes());
}

#[test]
fn parser_reconstructs_best_so_far_traces() {
    let dir = tempfile::tempdir().unwrap();
    let c = run_campaign(&config("lqi", OptimizerKind::Random, 8, 2)).unwrap();
    write_outputs(&c, dir.path()).unwrap();
    let rows = read_evals(&dir.path().join("evals.csv")).unwrap();
    for r in &c.repeats {
        let parsed: Vec<Option<f64>> = rows.iter().filter(|row| row.repeat == r.repeat).map(|row| row.best_so_far).collect();
        assert_eq!(parsed, r.run.best_so_far());
        let xs: Vec<&Vec<f64>> = rows.iter().filter(|row| row.repeat == r.repeat).map(|row| &row.x).collect();
        assert!(xs.iter().zip(&r.run.evaluations).all(|(a, e)| **a == e.x_raw));
    }
}

#[test]
fn trace_and_summary_agree() {
    let dir = tempfile::tempdir().unwrap();
    let c = run_campaign(&config("pi_8l", OptimizerKind::Random, 6, 3)).unwrap();
    write_outputs(&c, dir.path()).unwrap();
    let trace = fs::read_to_string(dir.path().join("trace.dat")).unwrap();
    let data: Vec<Vec<f64>> = trace
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(data.len(), 6);
    for (k, row) in data.iter().enumerate() {
        assert_eq!(row[0] as usize, k + 1);
        assert_eq!(row[1], c.summary.median_trace[k]);
        assert!(row[2] <= row[1] && row[1] <= row[3]);
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().filter(|l| l.starts_with("repeat,")).count(), 3);
    assert_eq!(summary.lines().filter(|l| l.starts_with("trace,")).count(), 6);
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"case": "pi_7l", "repeats": 3, "budget": 13, "base_seed": 5}"#);
    let mut outputs = Vec::new();
    for (i, threads) in ["0", "4", "0"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let o = tune(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], threads);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(["evals.csv", "summary.csv", "trace.dat"].map(|f| fs::read(out.join(f)).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn cli_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"case": "pi_8l", "optimizer": "random", "repeats": 1, "out": "unused"}"#);
    let out = dir.path().join("o");
    let o = tune(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--budget", "7", "--seed", "3"], "0");
    assert!(o.status.success());
    let rows = read_evals(&out.join("evals.csv")).unwrap();
    assert_eq!(rows.len(), 7);

    let mut direct = config("pi_8l", OptimizerKind::Random, 7, 1);
    direct.base_seed = 3;
    let c = run_campaign(&direct).unwrap();
    assert_eq!(rows.last().unwrap().best_so_far, c.repeats[0].run.best_objective());
}

#[test]
fn compare_writes_both_optimizers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"case": "pi_8l", "repeats": 2, "budget": 9}"#);
    let out = dir.path().join("cmp");
    let o = tune(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()], "2");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for sub in ["gibo", "random"] {
        assert_eq!(read_evals(&out.join(sub).join("evals.csv")).unwrap().len(), 18);
    }
    let joint = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert_eq!(joint.lines().count(), 5);
    assert!(String::from_utf8_lossy(&o.stdout).contains("median final"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = tune(&["case", "--list"], "0");
    assert_eq!(o.status.code(), Some(0));
    let listing = String::from_utf8_lossy(&o.stdout);
    for name in ["pi_8l", "pi_7l", "cascaded_pi", "lqi"] {
        assert!(listing.contains(name));
    }

    let missing = dir.path().join("missing.json");
    assert_eq!(tune(&["run", "--config", missing.to_str().unwrap()], "0").status.code(), Some(1));
    let bad = write_config(dir.path(), r#"{"case": "pi_8l", "budgte": 10}"#);
    assert_eq!(tune(&["run", "--config", &bad], "0").status.code(), Some(1));
    assert_eq!(tune(&["frobnicate"], "0").status.code(), Some(1));

    let good = write_config(dir.path(), r#"{"case": "pi_8l", "optimizer": "random", "repeats": 1, "budget": 2}"#);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = tune(&["run", "--config", &good, "--out", blocker.join("sub").to_str().unwrap()], "0");
    assert_eq!(o.status.code(), Some(2));
}
