//! Tune a 2-D objective whose minimum lies behind a crash boundary. Crashed
//! steps reset the iterate; every returned iterate is feasible.

use crashgibo::optimizer::{run_gibo, GiboConfig, Objective};
use crashgibo::{EvalOutcome, SearchDomain};

struct Wall {
    domain: SearchDomain,
}

impl Objective for Wall {
    fn domain(&self) -> &SearchDomain {
        &self.domain
    }

    fn evaluate(&self, x: &[f64], _seed: u64) -> EvalOutcome {
        if x[0] > 8.0 {
            EvalOutcome::Crash
        } else {
            EvalOutcome::Success(((x[0] - 9.5) / 10.0).powi(2) + ((x[1] - 5.0) / 10.0).powi(2))
        }
    }
}

fn main() -> crashgibo::Result<()> {
    let obj = Wall {
        domain: SearchDomain::new(vec![0.0, 0.0], vec![10.0, 10.0])?,
    };
    let cfg = GiboConfig {
        max_evals: 49,
        objective_scale: 0.1,
        ..GiboConfig::default()
    };
    let run = run_gibo(&obj, &[6.0, 2.0], &cfg)?;

    for (k, x) in run.iterates.iter().enumerate() {
        let raw = run.domain.denormalize(x);
        println!("iterate {k:>2}: ({:.3}, {:.3})", raw[0], raw[1]);
    }
    println!("{} evaluations, {} crashes, {} resets", run.n_evals(), run.n_crashes(), run.resets.len());
    println!("final objective {:.5}", run.final_objective().unwrap_or(f64::NAN));
    Ok(())
}
