//! The exponential map and its differential along a family of covectors,
//! showing where `d exp` drops rank.
//!
//! ```text
//! cargo run --example exponential_map
//! ```

use std::f64::consts::TAU;

use subriem::flow::{d_exp, exp_map};
use subriem::linalg::sorted_svd;
use subriem::structure::Structure;

fn main() -> anyhow::Result<()> {
    let h = Structure::heisenberg();
    let origin = [0.0; 3];

    println!("{:>8} {:>12} {:>12} {:>12}   smallest singular values of d exp", "alpha0", "x", "y", "tau");
    for alpha in [1.0, 3.0, 5.0, 6.0, TAU, 6.5, 8.0, 8.986818915818128, 10.0] {
        let cov = [1.0, 0.0, alpha];
        let q = exp_map(&h, &origin, &cov, 1e-10)?;
        let sv = sorted_svd(&d_exp(&h, &origin, &cov, 1e-10)?).singular_values;
        println!("{alpha:>8.4} {:>12.8} {:>12.8} {:>12.8}   {:.3e} {:.3e}", q[0], q[1], q[2], sv[1], sv[2]);
    }

    // two different covectors with the same image
    let a = exp_map(&h, &origin, &[1.0, 0.0, TAU], 1e-10)?;
    let b = exp_map(&h, &origin, &[0.0, 1.0, TAU], 1e-10)?;
    println!("exp(1, 0, 2pi) = {:.10?}", a.as_slice());
    println!("exp(0, 1, 2pi) = {:.10?}", b.as_slice());
    println!("1/(4 pi)       = {:.10}", 1.0 / (2.0 * TAU));
    Ok(())
}
