//! Compare the crash-aware optimizer with random search on a benchmark case
//! and write the CSV outputs.
//!
//! `cargo run --release --example campaign -- pi_7l out/campaign`

use std::path::PathBuf;

use crashgibo::harness::{run_campaign, write_outputs, ExperimentConfig, OptimizerKind};

fn main() -> crashgibo::Result<()> {
    let mut args = std::env::args().skip(1);
    let case = args.next().unwrap_or_else(|| "pi_8l".into());
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/campaign".into()));

    for optimizer in [OptimizerKind::Gibo, OptimizerKind::Random] {
        let mut cfg = ExperimentConfig::new(&case, optimizer);
        cfg.repeats = 5;
        let c = run_campaign(&cfg)?;
        let dir = out.join(optimizer.as_str());
        write_outputs(&c, &dir)?;
        let s = &c.summary;
        println!(
            "{:<6} median final {:.5}  crashes {:>3}  best-so-far median at eval 10/{}: {:.5} / {:.5}",
            optimizer.as_str(),
            s.median_final(),
            s.total_crashes(),
            s.budget,
            s.median_trace[9],
            s.median_trace[s.budget - 1]
        );
        println!("       wrote {}", dir.display());
    }
    Ok(())
}
