//! Fit a GP to a few noisy samples of a 2-D function and compare the posterior
//! gradient belief at a point with the true gradient.

use crashgibo::gp::{self, GpHyperparams};
use crashgibo::ParamVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn f(x: &[f64]) -> f64 {
    1.0 + (x[0] - 0.3).powi(2) + 0.5 * (x[1] - 0.6).powi(2)
}

fn main() -> crashgibo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x_star = ParamVector::new(vec![0.5, 0.5]);
    let xs: Vec<ParamVector> = (0..12)
        .map(|_| ParamVector::new(x_star.coords().iter().map(|c| c + rng.random_range(-0.2..0.2)).collect()))
        .collect();
    let ys: Vec<f64> = xs.iter().map(|x| f(x.coords()) + rng.random_range(-0.005..0.005)).collect();

    let model = gp::fit(&xs, &ys, &GpHyperparams::standard(2, 1e-4))?;
    let belief = model.posterior_gradient(&x_star);
    let (mean, var) = model.posterior(&x_star);

    println!("posterior at x*: mean {mean:.4}, variance {var:.2e} (true {:.4})", f(x_star.coords()));
    println!("gradient mean      {:.4} {:.4}", belief.mean[0], belief.mean[1]);
    println!("true gradient      {:.4} {:.4}", 2.0 * (0.5 - 0.3), 0.5 - 0.6);
    println!("gradient std       {:.4} {:.4}", belief.cov[(0, 0)].sqrt(), belief.cov[(1, 1)].sqrt());
    println!("total variance     {:.4e}", belief.total_variance());
    Ok(())
}
