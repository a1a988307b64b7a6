//! A crash next to the iterate becomes a pessimistic virtual observation, and
//! the gradient estimate turns away from it.

use crashgibo::crash_model::augment;
use crashgibo::gp::GpHyperparams;
use crashgibo::{Dataset, EvalOutcome, ParamVector};

fn main() -> crashgibo::Result<()> {
    let h = GpHyperparams::standard(1, 1e-4);
    let x_star = ParamVector::new(vec![0.5]);
    let ds = Dataset::new()
        .with_record(ParamVector::new(vec![0.4]), EvalOutcome::Success(1.0))
        .with_record(ParamVector::new(vec![0.5]), EvalOutcome::Success(0.9))
        .with_record(ParamVector::new(vec![0.6]), EvalOutcome::Crash);

    let feasible_only = crashgibo::gp::fit_feasible(&ds, &h)?;
    println!("gradient ignoring the crash: {:+.4}", feasible_only.posterior_gradient(&x_star).mean[0]);

    for beta in [0.0, 1.0, 3.0, 6.0] {
        let aug = augment(&ds, &x_star, beta, &h)?;
        let y_hat = aug.virtual_points().next().map(|v| v.y_hat).unwrap_or(f64::NAN);
        let g = aug.fit(&h)?.posterior_gradient(&x_star).mean[0];
        println!("beta {beta:>3}: virtual value {y_hat:.4}, gradient {g:+.4}");
    }
    Ok(())
}
