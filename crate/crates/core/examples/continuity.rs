//! Rays through a neighbourhood of a conjugate covector all carry the same
//! total multiplicity of conjugate times near `t = 1`.
//!
//! ```text
//! cargo run --release --example continuity
//! ```

use std::f64::consts::TAU;

use subriem::maslov::continuity_check;
use subriem::structure::Structure;

fn main() -> anyhow::Result<()> {
    let h = Structure::heisenberg();
    for cov in [[1.0, 0.0, TAU], [0.3, 0.9, 8.986818915818128], [1.0, 0.0, 4.0]] {
        let rep = continuity_check(&h, &[0.0; 3], &cov, 1e-2, 20, 42, 1e-10)?;
        let counts: Vec<usize> = rep.rays.iter().map(|r| r.total_multiplicity).collect();
        println!(
            "covector {cov:.4?}: kernel dimension {}, window [{:.3}, {:.3}], multiplicities per ray {counts:?} -> {}",
            rep.kernel_dim,
            rep.window[0],
            rep.window[1],
            if rep.passed() { "consistent" } else { "inconsistent" }
        );
    }
    Ok(())
}
