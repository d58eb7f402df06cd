//! Pairs of distinct covectors with the same image under `exp`, found in
//! shrinking neighbourhoods of conjugate covectors on both branches.
//!
//! ```text
//! cargo run --example non_injectivity
//! ```

use std::f64::consts::TAU;

use subriem::heisenberg::{find_collision, heis_conjugate_roots, HeisCovector, RootBranch};

fn main() -> anyhow::Result<()> {
    let alpha_star = heis_conjugate_roots(10.0)
        .into_iter()
        .find(|r| r.branch == RootBranch::SinNonzero)
        .map(|r| r.alpha)
        .unwrap();

    for (label, cov) in [("alpha0 = 2pi", [1.0, 0.0, TAU]), ("alpha0 = alpha*", [1.0, 0.0, alpha_star])] {
        println!("{label}");
        let hc = HeisCovector::at_origin(cov);
        for radius in [0.5, 0.1, 0.02, 0.004] {
            let c = find_collision(&hc, radius)?;
            println!(
                "  radius {radius:<6} lambda1 {:.6?} lambda2 {:.6?} separation {:.3e} gap {:.1e} ({} Newton steps)",
                c.lambda1, c.lambda2, c.separation, c.gap, c.iterations
            );
        }
    }
    Ok(())
}
