use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crashgibo::harness::{output, run_campaign, write_comparison, write_outputs, Campaign, ExperimentConfig, OptimizerKind};
use crashgibo::plant::{make_case, CASE_NAMES};
use crashgibo::Error;

/// Controller tuning campaigns on the simulated tank benchmark.
#[derive(Parser)]
#[command(name = "tune", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimizer on one case.
    Run(RunArgs),
    /// Show the benchmark cases.
    Case {
        #[arg(long)]
        list: bool,
    },
    /// Run GIBO and random search on the same case and compare.
    Compare(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Base seed; repeat r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluations per repeat.
    #[arg(long)]
    budget: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> crashgibo::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if self.budget.is_some() {
            cfg.budget = self.budget;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report(c: &Campaign) {
    let s = &c.summary;
    println!(
        "{:<7} {:<12} repeats {:>3}  budget {:>3}  median final {:.6}  crashes {:>4}  {:.1}s",
        s.optimizer.as_str(),
        s.case,
        c.repeats.len(),
        s.budget,
        s.median_final(),
        s.total_crashes(),
        s.wall_clock_secs
    );
}

fn run(args: &RunArgs) -> crashgibo::Result<()> {
    let cfg = args.load()?;
    let c = run_campaign(&cfg)?;
    write_outputs(&c, &cfg.out)?;
    report(&c);
    println!("wrote {}", cfg.out.display());
    Ok(())
}

fn compare(args: &RunArgs) -> crashgibo::Result<()> {
    let base = args.load()?;
    let mut campaigns = Vec::new();
    for kind in [OptimizerKind::Gibo, OptimizerKind::Random] {
        let mut cfg = base.clone();
        cfg.optimizer = kind;
        cfg.validate()?;
        let c = run_campaign(&cfg)?;
        write_outputs(&c, &base.out.join(kind.as_str()))?;
        report(&c);
        campaigns.push(c);
    }
    write_comparison(&base.out.join("compare.csv"), &campaigns.iter().map(|c| &c.summary).collect::<Vec<_>>())?;
    let (g, r) = (campaigns[0].summary.median_final(), campaigns[1].summary.median_final());
    println!("gibo/random median final ratio {}", output::fmt_num(g / r));
    println!("wrote {}", base.out.display());
    Ok(())
}

fn list_cases() -> crashgibo::Result<()> {
    println!("{:<12} {:>3} {:>5} {:>9} {:>7}", "case", "d", "obj", "crash_v2", "budget");
    for name in CASE_NAMES {
        let c = make_case(name)?;
        println!(
            "{:<12} {:>3} {:>5} {:>9} {:>7}",
            name,
            c.dim(),
            c.objective.as_str(),
            c.crash_threshold,
            c.default_budget
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Case { list: _ } => list_cases(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
