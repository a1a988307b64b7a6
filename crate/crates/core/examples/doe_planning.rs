//! Plan the batch of experiments that most reduces the uncertainty of the
//! gradient at the current iterate, and compare with a random batch.

use crashgibo::acquisition::{plan_doe, total_variance};
use crashgibo::gp::{self, GpHyperparams};
use crashgibo::ParamVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> crashgibo::Result<()> {
    let d = 2;
    let x_star = ParamVector::new(vec![0.4, 0.6]);
    let model = gp::fit(std::slice::from_ref(&x_star), &[1.2], &GpHyperparams::standard(d, 1e-3))?;

    let plan = plan_doe(&model, &x_star, d + 1, 8, 0);
    println!("total variance with no new data: {:.4}", total_variance(&model, &x_star, &[]));
    println!("planned batch ({} starts): {:.4}", plan.starts_tried, plan.achieved_total_variance);
    for p in &plan.batch {
        let off: Vec<String> = p.coords().iter().zip(x_star.coords()).map(|(a, b)| format!("{:+.3}", a - b)).collect();
        println!("  x* {}", off.join(" "));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let random: Vec<ParamVector> = (0..d + 1)
        .map(|_| ParamVector::new((0..d).map(|_| rng.random()).collect()))
        .collect();
    println!("random batch: {:.4}", total_variance(&model, &x_star, &random));
    Ok(())
}
