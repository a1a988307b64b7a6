//! Simulate the coupled tanks under a PI level controller and score the
//! reference step, for a sluggish and a well-tuned gain pair.

use crashgibo::plant::{make_case, objective_rmse, run_episode, ControllerSpec};

fn main() -> crashgibo::Result<()> {
    for name in ["pi_8l", "pi_7l"] {
        let case = make_case(name)?;
        for (kp, ki) in [(0.2, 0.001), (0.6, 0.01)] {
            let spec = ControllerSpec::Pi { kp_out: kp, ki_out: ki };
            let res = run_episode(&spec, &case, 0)?;
            let score = match objective_rmse(&res) {
                Ok(v) => format!("RMSE {v:.4}"),
                Err(_) => format!("crash at t = {:.1} s", res.crash_time.unwrap_or(f64::NAN)),
            };
            println!("{name} kp {kp:<4} ki {ki:<6} max V2 {:.3} l  {score}", res.max_v2());
        }
    }

    let case = make_case("pi_8l")?;
    let res = run_episode(&ControllerSpec::Pi { kp_out: 0.6, ki_out: 0.01 }, &case, 0)?;
    println!("\n   t     V2     V3     V4   ref V4");
    for s in res.trajectory.iter().step_by(100) {
        println!("{:>5.1} {:>6.3} {:>6.3} {:>6.3} {:>6.3}", s.t, s.state.v2, s.state.v3, s.state.v4, s.reference.v4);
    }
    Ok(())
}
