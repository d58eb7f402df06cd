//! Jacobi fields in the Darboux frame `(∂_p, ∂_q)` along an extremal.
//!
//! A Jacobi field has coordinates `(p(t), x(t))`: `x` is the field itself
//! and `p` its derivative `∇J` in this frame. They evolve by
//! `(ṗ, ẋ) = [[−Aᵀ, R], [B, A]] (p, x)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flow::ExtremalTrajectory;
use crate::integrator::{self, StepControl};
use crate::linalg::{self, column_space, null_space, numerical_rank};

/// Name of the moving frame all coordinates here refer to.
pub const DARBOUX_FRAME: &str = "darboux";

/// Blocks of the linearized Hamiltonian field at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrices {
    pub t: f64,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let mut s = (&m + m.transpose()) * 0.5;
    // make the result bitwise symmetric
    for i in 0..s.nrows() {
        for j in 0..i {
            s[(i, j)] = s[(j, i)];
        }
    }
    s
}

impl FrameMatrices {
    /// From the Hessian of `H` in `(q, p)` order: `A = H_pq`, `B = H_pp`,
    /// `R = −H_qq`.
    pub fn from_hessian(t: f64, hess: &DMatrix<f64>) -> Self {
        let n = hess.nrows() / 2;
        Self {
            t,
            a: hess.view((n, 0), (n, n)).into_owned(),
            b: symmetrize(hess.view((n, n), (n, n)).into_owned()),
            r: symmetrize(-hess.view((0, 0), (n, n)).into_owned()),
        }
    }

    /// `[[−Aᵀ, R], [B, A]]`.
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.a.nrows();
        let mut g = DMatrix::zeros(2 * n, 2 * n);
        g.view_mut((0, 0), (n, n)).copy_from(&(-self.a.transpose()));
        g.view_mut((0, n), (n, n)).copy_from(&self.r);
        g.view_mut((n, 0), (n, n)).copy_from(&self.b);
        g.view_mut((n, n), (n, n)).copy_from(&self.a);
        g
    }
}

pub fn frame_matrices(traj: &ExtremalTrajectory, t: f64) -> Result<FrameMatrices> {
    let (st, _) = traj.sample_at(t)?;
    let jet = traj.structure().jet(st.q.as_slice(), st.p.as_slice());
    Ok(FrameMatrices::from_hessian(t, &jet.hessian))
}

/// A Jacobi field sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiCoordinates {
    pub frame: &'static str,
    pub times: Vec<f64>,
    /// `∇J(tᵢ)`
    pub p: Vec<DVector<f64>>,
    /// `J(tᵢ)`
    pub x: Vec<DVector<f64>>,
}

impl JacobiCoordinates {
    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| s == t)
            .ok_or(Error::NotOnGrid(t))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn check_initial(traj: &ExtremalTrajectory, p0: &DVector<f64>, x0: &DVector<f64>) -> Result<()> {
    let s = traj.structure();
    s.check_len("p0", p0.len())?;
    s.check_len("x0", x0.len())
}

/// `(p(t), x(t)) = Φ(t)(p₀, x₀)` on the trajectory's grid.
pub fn propagate_jacobi(
    traj: &ExtremalTrajectory,
    p0: &DVector<f64>,
    x0: &DVector<f64>,
) -> Result<JacobiCoordinates> {
    check_initial(traj, p0, x0)?;
    let n = traj.dim();
    let init = stack(p0, x0);
    let mut p = Vec::with_capacity(traj.times().len());
    let mut x = Vec::with_capacity(traj.times().len());
    for phi in traj.phis() {
        let v = phi * &init;
        p.push(v.rows(0, n).into_owned());
        x.push(v.rows(n, n).into_owned());
    }
    Ok(JacobiCoordinates {
        frame: DARBOUX_FRAME,
        times: traj.times().to_vec(),
        p,
        x,
    })
}

/// Same field, obtained by integrating the frame equation together with the
/// extremal instead of reading `Φ`. Lands on the trajectory's grid.
pub fn propagate_jacobi_frame_ode(
    traj: &ExtremalTrajectory,
    p0: &DVector<f64>,
    x0: &DVector<f64>,
) -> Result<JacobiCoordinates> {
    check_initial(traj, p0, x0)?;
    let s = traj.structure();
    let n = traj.dim();
    let start = &traj.states()[0];
    let mut y = Vec::with_capacity(4 * n);
    y.extend_from_slice(start.q.as_slice());
    y.extend_from_slice(start.p.as_slice());
    y.extend_from_slice(p0.as_slice());
    y.extend_from_slice(x0.as_slice());

    let mut times = vec![0.0];
    let mut p = vec![p0.clone()];
    let mut x = vec![x0.clone()];
    integrator::integrate(
        |t, y, dy| {
            let jet = s.jet(&y[..n], &y[n..2 * n]);
            for i in 0..n {
                dy[i] = jet.gradient[n + i];
                dy[n + i] = -jet.gradient[i];
            }
            let g = FrameMatrices::from_hessian(t, &jet.hessian).generator();
            let px = DVector::from_column_slice(&y[2 * n..]);
            let d = g * px;
            dy[2 * n..].copy_from_slice(d.as_slice());
        },
        0.0,
        &y,
        &traj.times()[1..],
        StepControl::from_tol(traj.tol()),
        |t, y, stop| {
            if stop {
                times.push(t);
                p.push(DVector::from_column_slice(&y[2 * n..3 * n]));
                x.push(DVector::from_column_slice(&y[3 * n..]));
            }
        },
    )?;
    Ok(JacobiCoordinates {
        frame: DARBOUX_FRAME,
        times,
        p,
        x,
    })
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut v = DVector::zeros(a.len() + b.len());
    v.rows_mut(0, a.len()).copy_from(a);
    v.rows_mut(a.len(), b.len()).copy_from(b);
    v
}

/// `⟨p_J, x_K⟩ − ⟨p_K, x_J⟩` at a grid time `t`.
pub fn pairing(j: &JacobiCoordinates, k: &JacobiCoordinates, t: f64) -> Result<f64> {
    if j.times != k.times || j.frame != k.frame {
        return Err(Error::GridMismatch);
    }
    let i = j.index_of(t)?;
    Ok(j.p[i].dot(&k.x[i]) - k.p[i].dot(&j.x[i]))
}

/// `max_t |pairing(t) − pairing(0)|`.
pub fn pairing_drift(j: &JacobiCoordinates, k: &JacobiCoordinates) -> Result<f64> {
    let p0 = pairing(j, k, j.times[0])?;
    j.times.iter().try_fold(0.0_f64, |acc, &t| {
        Ok(acc.max((pairing(j, k, t)? - p0).abs()))
    })
}

/// Split `T_{γ(t)}M` into the values of Jacobi fields vanishing at `0` and
/// the derivatives of those vanishing at both `0` and `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub t: f64,
    pub frame: &'static str,
    /// Orthonormal basis of `{J(t) : J(0) = 0}`.
    pub a_basis: DMatrix<f64>,
    /// Orthonormal basis of `{∇J(t) : J(0) = J(t) = 0}`.
    pub b_basis: DMatrix<f64>,
    /// Largest `|⟨a, b⟩|` over the two bases.
    pub cross_gram: f64,
}

impl DecompositionReport {
    pub fn dims(&self) -> (usize, usize) {
        (self.a_basis.ncols(), self.b_basis.ncols())
    }
}

fn blocks(phi: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = phi.nrows() / 2;
    (
        phi.view((0, 0), (n, n)).into_owned(),
        phi.view((n, 0), (n, n)).into_owned(),
    )
}

fn decompose(t: f64, phi: &DMatrix<f64>) -> Result<DecompositionReport> {
    let (phi_pp, phi_xp) = blocks(phi);
    let a_basis = column_space(&phi_xp)?;
    let kernel = null_space(&phi_xp)?;
    let b_basis = if kernel.ncols() == 0 {
        DMatrix::zeros(phi_pp.nrows(), 0)
    } else {
        linalg::orthonormalize(&(phi_pp * kernel))
    };
    let cross_gram = if a_basis.ncols() == 0 || b_basis.ncols() == 0 {
        0.0
    } else {
        linalg::max_abs(&(a_basis.transpose() * &b_basis))
    };
    Ok(DecompositionReport {
        t,
        frame: DARBOUX_FRAME,
        a_basis,
        b_basis,
        cross_gram,
    })
}

pub fn decomposition(traj: &ExtremalTrajectory, t: f64) -> Result<DecompositionReport> {
    let (_, phi) = traj.sample_at(t)?;
    decompose(t, &phi)
}

/// `C = [[X, XS], [0, X⁻ᵀ]]` (symplectic for symmetric `S`), a constant
/// change of moving frame that keeps the vertical directions vertical.
pub fn vertical_frame_change(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let x_inv = x
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("frame change block is singular".into()))?;
    let mut c = DMatrix::zeros(2 * n, 2 * n);
    c.view_mut((0, 0), (n, n)).copy_from(x);
    c.view_mut((0, n), (n, n)).copy_from(&(x * symmetrize(s.clone())));
    c.view_mut((n, n), (n, n)).copy_from(&x_inv.transpose());
    Ok(c)
}

/// `B_{γ(t)}` computed in the frame changed by `C` (see
/// [`vertical_frame_change`]), expressed back in Darboux coordinates.
pub fn b_space_in_frame(
    traj: &ExtremalTrajectory,
    t: f64,
    change: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = traj.dim();
    let (_, phi) = traj.sample_at(t)?;
    let c_inv = change
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("frame change is singular".into()))?;
    let phi_new = &c_inv * phi * change;
    let rep = decompose(t, &phi_new)?;
    let x = change.view((0, 0), (n, n));
    if rep.b_basis.ncols() == 0 {
        return Ok(rep.b_basis);
    }
    Ok(linalg::orthonormalize(&(x * rep.b_basis)))
}

/// Outcome of the regularity check at `t = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub kernel_dim: usize,
    pub image_rank: usize,
    /// Rank of `[image basis | ∇J_A(1) for A in the kernel]`.
    pub combined_rank: usize,
    pub singular_values: Vec<f64>,
}

impl RegularityReport {
    /// The map `A ↦ ∇J_A(1) + Im d exp` is an isomorphism.
    pub fn passed(&self) -> bool {
        self.combined_rank == self.image_rank + self.kernel_dim
    }
}

pub fn regularity_check(traj: &ExtremalTrajectory) -> Result<RegularityReport> {
    let (_, phi) = traj.sample_at(1.0)?;
    let (phi_pp, phi_xp) = blocks(&phi);
    let decision = numerical_rank(&phi_xp)?;
    let kernel = null_space(&phi_xp)?;
    let image = column_space(&phi_xp)?;
    let derivs = &phi_pp * &kernel;
    let mut combined = DMatrix::zeros(phi_xp.nrows(), image.ncols() + derivs.ncols());
    combined.view_mut((0, 0), image.shape()).copy_from(&image);
    combined
        .view_mut((0, image.ncols()), derivs.shape())
        .copy_from(&derivs);
    let combined_rank = if combined.ncols() == 0 {
        0
    } else {
        numerical_rank(&combined)?.rank
    };
    Ok(RegularityReport {
        kernel_dim: kernel.ncols(),
        image_rank: image.ncols(),
        combined_rank,
        singular_values: decision.singular_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate_extremal, integrate_extremal_at};
    use crate::linalg::max_principal_angle;
    use crate::structure::Structure;
    use std::f64::consts::TAU;

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn heis_traj(cov: [f64; 3]) -> ExtremalTrajectory {
        let times: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        integrate_extremal_at(&Structure::heisenberg(), &[0.0; 3], &cov, &times, 1e-11).unwrap()
    }

    #[test]
    fn heisenberg_frame_blocks() {
        let a0 = 2.7;
        let traj = heis_traj([0.4, -0.3, a0]);
        for t in [0.0, 0.35, 1.0] {
            let fm = frame_matrices(&traj, t).unwrap();
            let r = DMatrix::from_diagonal(&DVector::from_vec(vec![
                -a0 * a0 / 4.0,
                -a0 * a0 / 4.0,
                0.0,
            ]));
            assert!((&fm.r - r).amax() < 1e-12);
            assert!((fm.b.view((0, 0), (2, 2)) - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
            assert_eq!(fm.b, fm.b.transpose());
            assert_eq!(fm.r, fm.r.transpose());
            assert!((fm.a[(0, 1)] + a0 / 2.0).abs() < 1e-12);
            assert!((fm.a[(1, 0)] - a0 / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn euclidean_frame_blocks() {
        let s = Structure::euclidean(2).unwrap();
        let traj = integrate_extremal(&s, &[1.0, 2.0], &[0.3, 0.1], 1.0, 1e-10).unwrap();
        let fm = frame_matrices(&traj, 0.5).unwrap();
        assert_eq!(fm.a, DMatrix::zeros(2, 2));
        assert_eq!(fm.r, DMatrix::zeros(2, 2));
        assert_eq!(fm.b, DMatrix::identity(2, 2));
        assert!(frame_matrices(&traj, 2.0).is_err());
    }

    #[test]
    fn zero_field_and_conjugate_direction() {
        let traj = heis_traj([1.0, 0.0, TAU]);
        let z = propagate_jacobi(&traj, &DVector::zeros(3), &DVector::zeros(3)).unwrap();
        assert!(z.x.iter().chain(&z.p).all(|v| v.norm() == 0.0));
        let j = propagate_jacobi(&traj, &e(3, 1), &DVector::zeros(3)).unwrap();
        assert!(j.x.last().unwrap().norm() < 1e-8);
        assert!(j.p.last().unwrap().norm() > 0.1);
    }

    #[test]
    fn two_code_paths_agree() {
        let traj = heis_traj([0.7, 0.2, 3.3]);
        let p0 = DVector::from_vec(vec![0.3, -1.0, 0.2]);
        let x0 = DVector::from_vec(vec![0.5, 0.1, -0.4]);
        let a = propagate_jacobi(&traj, &p0, &x0).unwrap();
        let b = propagate_jacobi_frame_ode(&traj, &p0, &x0).unwrap();
        assert_eq!(a.times, b.times);
        for i in 0..a.len() {
            assert!((&a.x[i] - &b.x[i]).amax() < 1e-8);
            assert!((&a.p[i] - &b.p[i]).amax() < 1e-8);
        }
    }

    #[test]
    fn pairing_examples() {
        let traj = heis_traj([0.7, 0.2, 3.3]);
        let j = propagate_jacobi(&traj, &e(3, 0), &DVector::zeros(3)).unwrap();
        let k = propagate_jacobi(&traj, &DVector::zeros(3), &e(3, 0)).unwrap();
        for &t in &j.times {
            assert_eq!(pairing(&j, &j, t).unwrap(), 0.0);
            assert!((pairing(&j, &k, t).unwrap() - 1.0).abs() < 1e-9);
        }
        assert!(pairing_drift(&j, &k).unwrap() < 1e-9);
        assert!(matches!(pairing(&j, &k, 0.123), Err(Error::NotOnGrid(_))));
        let other = integrate_extremal(&Structure::heisenberg(), &[0.0; 3], &[0.7, 0.2, 3.3], 1.0, 1e-10)
            .unwrap();
        let l = propagate_jacobi(&other, &e(3, 0), &DVector::zeros(3)).unwrap();
        assert!(matches!(pairing(&j, &l, 0.0), Err(Error::GridMismatch)));
    }

    #[test]
    fn decomposition_examples() {
        let traj = heis_traj([1.0, 0.0, TAU]);
        let rep = decomposition(&traj, 0.5).unwrap();
        assert_eq!(rep.dims(), (3, 0));
        let rep = decomposition(&traj, 1.0).unwrap();
        assert_eq!(rep.dims(), (2, 1));
        assert!(rep.cross_gram < 1e-7);
        // B is spanned by ∇J of the kernel field
        let j = propagate_jacobi(&traj, &e(3, 1), &DVector::zeros(3)).unwrap();
        let dj = j.p.last().unwrap().normalize();
        let dj = DMatrix::from_column_slice(3, 1, dj.as_slice());
        assert!(max_principal_angle(&rep.b_basis, &dj) < 1e-6);

        let s = Structure::euclidean(3).unwrap();
        let traj = integrate_extremal(&s, &[0.0; 3], &[1.0, 2.0, 3.0], 1.0, 1e-10).unwrap();
        assert_eq!(decomposition(&traj, 1.0).unwrap().dims(), (3, 0));
    }

    #[test]
    fn b_space_is_frame_independent() {
        let traj = heis_traj([1.0, 0.0, TAU]);
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.1, 0.9, 0.4, -0.5, 0.2, 1.3]);
        let s = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.1, -0.3, 0.7, 0.0, 0.7, 0.2]);
        let c = vertical_frame_change(&x, &s).unwrap();
        assert!(linalg::symplectic_defect(&c) < 1e-12);
        let b_new = b_space_in_frame(&traj, 1.0, &c).unwrap();
        let b_old = decomposition(&traj, 1.0).unwrap().b_basis;
        assert_eq!(b_new.ncols(), 1);
        assert!(max_principal_angle(&b_new, &b_old) < 1e-6);
    }

    #[test]
    fn regularity_examples() {
        let rep = regularity_check(&heis_traj([1.0, 0.0, 2.0])).unwrap();
        assert_eq!(rep.kernel_dim, 0);
        assert!(rep.passed());
        let rep = regularity_check(&heis_traj([1.0, 0.0, TAU])).unwrap();
        assert_eq!(rep.kernel_dim, 1);
        assert!(rep.passed(), "{rep:?}");
        let roots = crate::heisenberg::heis_conjugate_roots(10.0);
        let rep = regularity_check(&heis_traj([1.0, 0.0, roots[1].alpha])).unwrap();
        assert_eq!(rep.kernel_dim, 1);
        assert!(rep.passed());
    }
}
