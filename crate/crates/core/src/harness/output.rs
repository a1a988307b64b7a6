//! CSV and plot-data writers.
//!
//! All files are written after the campaign completes, in `(repeat,
//! eval_index)` order, with numbers at 17 significant digits so that reruns
//! are byte-identical.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::campaign::{Campaign, CampaignSummary};
use crate::error::{Error, Result};
use crate::optimizer::EvalKind;

pub const EVALS_FILE: &str = "evals.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_FILE: &str = "trace.dat";

/// Formats with 17 significant digits; round-trips every finite `f64`.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// One data row of `evals.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub repeat: usize,
    /// 1-based index within the repeat.
    pub eval_index: usize,
    pub iteration: usize,
    pub kind: EvalKind,
    pub x: Vec<f64>,
    pub crashed: bool,
    pub objective: Option<f64>,
    pub best_so_far: Option<f64>,
}

pub fn evals_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = ["repeat", "eval_index", "iteration", "kind"].map(String::from).to_vec();
    h.extend((1..=d).map(|i| format!("x_{i}")));
    h.extend(["outcome", "objective", "best_so_far"].map(String::from));
    h
}

/// Flattens a campaign into `evals.csv` rows.
pub fn eval_rows(campaign: &Campaign) -> Vec<EvalRow> {
    let mut rows = Vec::new();
    for r in &campaign.repeats {
        let best = r.run.best_so_far();
        for (k, (e, b)) in r.run.evaluations.iter().zip(best).enumerate() {
            rows.push(EvalRow {
                repeat: r.repeat,
                eval_index: k + 1,
                iteration: e.iteration,
                kind: e.kind,
                x: e.x_raw.clone(),
                crashed: e.outcome.is_crash(),
                objective: e.outcome.value(),
                best_so_far: b,
            });
        }
    }
    rows
}

pub fn write_evals(path: &Path, d: usize, rows: &[EvalRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(evals_header(d)).map_err(csv_err)?;
    for row in rows {
        let mut rec = vec![row.repeat.to_string(), row.eval_index.to_string(), row.iteration.to_string(), row.kind.as_str().to_string()];
        rec.extend(row.x.iter().map(|&v| fmt_num(v)));
        rec.push(if row.crashed { "crash" } else { "success" }.to_string());
        rec.push(fmt_opt(row.objective));
        rec.push(fmt_opt(row.best_so_far));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Io(std::io::Error::other(format!("{EVALS_FILE} line {line}: bad {what} '{s}'"))))
}

fn parse_opt(s: &str, what: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_field(s, what, line).map(Some)
    }
}

/// Reads an `evals.csv` back.
pub fn read_evals(path: &Path) -> Result<Vec<EvalRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let n_cols = r.headers().map_err(csv_err)?.len();
    if n_cols < 8 {
        return Err(Error::Io(std::io::Error::other(format!("{EVALS_FILE}: too few columns"))));
    }
    let d = n_cols - 7;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        let kind = EvalKind::parse(&rec[3]).ok_or_else(|| Error::Io(std::io::Error::other(format!("{EVALS_FILE} line {line}: bad kind"))))?;
        let x = (0..d).map(|j| parse_field(&rec[4 + j], "x", line)).collect::<Result<Vec<f64>>>()?;
        rows.push(EvalRow {
            repeat: parse_field(&rec[0], "repeat", line)?,
            eval_index: parse_field(&rec[1], "eval_index", line)?,
            iteration: parse_field(&rec[2], "iteration", line)?,
            kind,
            x,
            crashed: &rec[4 + d] == "crash",
            objective: parse_opt(&rec[5 + d], "objective", line)?,
            best_so_far: parse_opt(&rec[6 + d], "best_so_far", line)?,
        });
    }
    Ok(rows)
}

/// `section,index,final_objective,crashes,median,q25,q75`: one `repeat` row per
/// repeat, one `final` row with the median and quartiles of the finals, then one
/// `trace` row per evaluation index.
pub fn write_summary(path: &Path, s: &CampaignSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["section", "index", "final_objective", "crashes", "median", "q25", "q75"]).map_err(csv_err)?;
    for (r, (f, c)) in s.finals.iter().zip(&s.crash_counts).enumerate() {
        w.write_record([String::from("repeat"), r.to_string(), fmt_opt(*f), c.to_string(), String::new(), String::new(), String::new()])
            .map_err(csv_err)?;
    }
    let finals: Vec<f64> = s.finals.iter().map(|f| f.unwrap_or(f64::INFINITY)).collect();
    if !finals.is_empty() {
        use super::campaign::quantile;
        w.write_record([
            String::from("final"),
            String::new(),
            String::new(),
            s.total_crashes().to_string(),
            fmt_num(quantile(&finals, 0.5)),
            fmt_num(quantile(&finals, 0.25)),
            fmt_num(quantile(&finals, 0.75)),
        ])
        .map_err(csv_err)?;
    }
    for k in 0..s.median_trace.len() {
        w.write_record([
            String::from("trace"),
            (k + 1).to_string(),
            String::new(),
            String::new(),
            fmt_num(s.median_trace[k]),
            fmt_num(s.q25_trace[k]),
            fmt_num(s.q75_trace[k]),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, s: &CampaignSummary) -> Result<()> {
    let mut out = String::from("# eval_index median q25 q75\n");
    for k in 0..s.median_trace.len() {
        out.push_str(&format!(
            "{} {} {} {}\n",
            k + 1,
            fmt_num(s.median_trace[k]),
            fmt_num(s.q25_trace[k]),
            fmt_num(s.q75_trace[k])
        ));
    }
    fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes `evals.csv`, `summary.csv` and `trace.dat` into `dir`, creating it.
pub fn write_outputs(campaign: &Campaign, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;
    let paths = [EVALS_FILE, SUMMARY_FILE, TRACE_FILE].map(|f| dir.join(f));
    write_evals(&paths[0], campaign.case.dim(), &eval_rows(campaign))?;
    write_summary(&paths[1], &campaign.summary)?;
    write_trace(&paths[2], &campaign.summary)?;
    Ok(paths.to_vec())
}

/// `optimizer,repeat,final_objective,crashes` for several campaigns on one case.
pub fn write_comparison(path: &Path, summaries: &[&CampaignSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["optimizer", "repeat", "final_objective", "crashes"]).map_err(csv_err)?;
    for s in summaries {
        for (r, (f, c)) in s.finals.iter().zip(&s.crash_counts).enumerate() {
            w.write_record([s.optimizer.as_str().to_string(), r.to_string(), fmt_opt(*f), c.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_with_17_digits() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, 123_456_789.123_456_79] {
            let s = fmt_num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!("inf".parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            evals_header(2),
            ["repeat", "eval_index", "iteration", "kind", "x_1", "x_2", "outcome", "objective", "best_so_far"]
        );
    }
}
