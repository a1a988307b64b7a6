//! Linearize the tanks at the operating point, solve the Riccati equation for
//! an LQI controller and run it on the nonlinear plant.

use crashgibo::plant::control::integral_augmentation;
use crashgibo::plant::dare::spectral_radius;
use crashgibo::plant::tank::A_P;
use crashgibo::plant::{linearize_discretize, make_case, objective_mae, run_episode, ControlInput, ControllerSpec, Lqi, TankParams};

fn main() -> crashgibo::Result<()> {
    let p = TankParams::calibrated();
    let (a, b) = linearize_discretize(&p);
    println!("open-loop spectral radius {:.6}", spectral_radius(&a));

    let case = make_case("lqi")?;
    for exponents in [[0.0; 8], [0.5, -1.0, 1.0, 0.0, 1.0, 0.5, 0.0, 1.0], [2.0; 8]] {
        let ctrl = Lqi::synthesize(&a, &b, &exponents, ControlInput::from_array(A_P), p.dt)?;
        let (aa, ba) = integral_augmentation(&a, &b, p.dt);
        let rho = spectral_radius(&(aa - ba * ctrl.gain()));
        let res = run_episode(&ControllerSpec::Lqi { exponents }, &case, 0)?;
        let mae = objective_mae(&res).map_or("crash".to_string(), |v| format!("{v:.4}"));
        println!("x = {exponents:?}\n  closed-loop radius {rho:.5}, MAE {mae}");
    }
    Ok(())
}
