//! Conjugate times as crossings of the Jacobi curve with the vertical
//! subspace, and the Maslov index that counts them.
//!
//! ```text
//! cargo run --example maslov_index
//! ```

use subriem::maslov::{count_conjugate_on_ray, maslov_index, ray_curve, CurveKind, JacobiCurve, LagrangianFrame, LagrangianPath, Reversed};
use subriem::structure::Structure;

fn main() -> anyhow::Result<()> {
    let h = Structure::heisenberg();
    let cov = [0.6, 0.8, 13.0];
    let (r, s) = (0.05, 1.0);

    for c in count_conjugate_on_ray(&h, &[0.0; 3], &cov, r, s, 1e-10)? {
        println!(
            "t* = {:.12}  alpha0 t* = {:.9}  multiplicity {}  signature {:+}",
            c.t,
            c.t * cov[2],
            c.multiplicity,
            c.signature
        );
    }

    let ver = LagrangianFrame::vertical(3);
    let curve = ray_curve(&h, &[0.0; 3], &cov, r, s, 1e-10)?;
    let (a, b) = curve.domain();
    println!("Jacobi curve index on [{r}, {s}]: {}", maslov_index(&curve, &ver, r, s)?);
    println!("reversed curve: {}", maslov_index(&Reversed(&curve), &ver, a + b - s, a + b - r)?);
    let evolution = JacobiCurve::new(curve.trajectory().clone(), CurveKind::Evolution);
    println!("evolution curve: {}", maslov_index(&evolution, &ver, r, s)?);
    println!("index up to t = 0.6: {}", maslov_index(&curve, &ver, r, 0.6)?);
    Ok(())
}
