//! Jacobi fields along a Heisenberg geodesic: frame matrices, a field
//! vanishing at a conjugate time, the symplectic pairing and the
//! regularity check.
//!
//! ```text
//! cargo run --example jacobi_fields
//! ```

use std::f64::consts::TAU;

use nalgebra::DVector;
use subriem::flow::integrate_extremal_at;
use subriem::jacobi::{decomposition, frame_matrices, pairing_drift, propagate_jacobi, regularity_check};
use subriem::structure::Structure;

fn main() -> anyhow::Result<()> {
    let h = Structure::heisenberg();
    let cov = [1.0, 0.0, TAU];
    let times: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let traj = integrate_extremal_at(&h, &[0.0; 3], &cov, &times, 1e-10)?;

    let fm = frame_matrices(&traj, 0.5)?;
    println!("A(0.5) ={:.6}B(0.5) ={:.6}R(0.5) ={:.6}", fm.a, fm.b, fm.r);

    // J(0) = 0, ∇J(0) = w with w in the kernel of d exp: J vanishes again at t = 1
    let w = DVector::from_column_slice(&[0.0, 1.0, 0.0]);
    let zero = DVector::zeros(3);
    let field = propagate_jacobi(&traj, &w, &zero)?;
    for &t in &[0.2, 0.5, 0.8, 1.0] {
        let i = field.index_of(t)?;
        println!("t = {t:.2}  |J| = {:.3e}  |grad J| = {:.3e}", field.x[i].norm(), field.p[i].norm());
    }

    let other = propagate_jacobi(&traj, &DVector::from_column_slice(&[0.3, -0.2, 1.0]), &DVector::from_column_slice(&[0.1, 0.0, 0.4]))?;
    println!("pairing drift {:.2e}", pairing_drift(&field, &other)?);

    let dec = decomposition(&traj, 1.0)?;
    println!("at t = 1: dim A = {}, dim B = {}, cross Gram {:.2e}", dec.dims().0, dec.dims().1, dec.cross_gram);
    let reg = regularity_check(&traj)?;
    println!(
        "regularity: kernel {}, image rank {}, combined rank {} -> {}",
        reg.kernel_dim,
        reg.image_rank,
        reg.combined_rank,
        if reg.passed() { "isomorphism" } else { "not an isomorphism" }
    );
    Ok(())
}
