//! Integrate a Heisenberg geodesic numerically and compare it with the
//! closed form at a few times.
//!
//! ```text
//! cargo run --example heisenberg_geodesic
//! ```

use subriem::flow::{check_constant_speed, integrate_extremal_at};
use subriem::heisenberg::{heis_exp_closed, HeisCovector};
use subriem::structure::Structure;

fn main() -> anyhow::Result<()> {
    let h = Structure::heisenberg();
    let point = [0.2, -0.1, 0.0];
    let covector = [0.8, 0.6, 5.0];
    let times: Vec<f64> = (1..=8).map(|i| i as f64 / 8.0).collect();

    let traj = integrate_extremal_at(&h, &point, &covector, &times, 1e-10)?;
    let hc = HeisCovector::new(point, covector);

    println!("{:>6} {:>14} {:>14} {:>14} {:>10}", "t", "x", "y", "tau", "error");
    for &t in &times {
        let (st, _) = traj.sample_at(t)?;
        let exact = heis_exp_closed(&hc, t).phase_state();
        let err = (&st.q - &exact.q).amax().max((&st.p - &exact.p).amax());
        println!("{t:>6.3} {:>14.10} {:>14.10} {:>14.10} {err:>10.2e}", st.q[0], st.q[1], st.q[2]);
    }

    let speed = check_constant_speed(&traj);
    println!("H = {:.6}, relative energy drift {:.2e}", speed.energy, speed.max_energy_drift);
    println!("worst symplectic defect {:.2e} over {} steps", traj.max_symplectic_defect(), traj.times().len() - 1);
    Ok(())
}
