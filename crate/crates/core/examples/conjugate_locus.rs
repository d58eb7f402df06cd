//! The Heisenberg conjugate locus: roots of the conjugate condition,
//! classification of conjugate covectors and a coarse grid scan checked
//! against the numerical rank of `d exp`.
//!
//! ```text
//! cargo run --release --example conjugate_locus
//! ```

use subriem::heisenberg::{classify_conjugate, fold_derivative, grid_values, heis_conjugate_roots, locus_scan, HeisCovector};

fn main() -> anyhow::Result<()> {
    for root in heis_conjugate_roots(20.0) {
        let hc = HeisCovector::at_origin([1.0, 0.0, root.alpha]);
        let class = classify_conjugate(&hc)?;
        println!(
            "alpha0 = {:<18.15} {:?} {} kernel {:.4?} fold derivative {:+.4e}",
            root.alpha,
            root.branch,
            class.tag(),
            class.kernel().unwrap_or_default(),
            fold_derivative(&hc)?
        );
    }

    let u = grid_values(0.2, 2.0, 10, false);
    let alpha = grid_values(0.0, 10.0, 40, true);
    let rows = locus_scan(&u, &alpha, 0.0, 1e-10)?;
    let conjugate = rows.iter().filter(|r| r.class.is_conjugate()).count();
    let disagreements = rows.iter().filter(|r| !r.agrees()).count();
    let closest = rows.iter().map(|r| r.sigma_ratio).fold(f64::INFINITY, f64::min);
    println!("{} cells, {conjugate} conjugate, {disagreements} disagreements, smallest sigma ratio {closest:.3e}", rows.len());
    Ok(())
}
