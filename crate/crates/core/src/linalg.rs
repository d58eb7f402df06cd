//! Small dense helpers: the canonical symplectic matrix, SVD-based rank
//! decisions, null spaces and subspace angles.
//!
//! Phase-space vectors are ordered `(δp, δq)` everywhere in this crate, so
//! the canonical form is `Ω = [[0, I], [-I, 0]]` and `ω(a, b) = aᵀ Ω b`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold below which a direction counts as null.
pub const RANK_REL_TOL: f64 = 1e-8;
/// Minimum ratio between the smallest accepted and largest rejected singular value.
pub const RANK_GAP: f64 = 1e3;

/// `Ω = [[0, I], [-I, 0]]` in `(δp, δq)` order.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        omega[(i, n + i)] = 1.0;
        omega[(n + i, i)] = -1.0;
    }
    omega
}

/// `ω(a, b) = ⟨a_p, b_q⟩ - ⟨a_q, b_p⟩`.
pub fn omega(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() / 2;
    (0..n).map(|i| a[i] * b[n + i] - a[n + i] * b[i]).sum()
}

/// `‖Φᵀ Ω Φ − Ω‖_∞` (largest absolute entry).
pub fn symplectic_defect(phi: &DMatrix<f64>) -> f64 {
    let omega = symplectic_form(phi.nrows() / 2);
    max_abs(&(phi.transpose() * &omega * phi - omega))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Thin SVD with singular values sorted in decreasing order.
///
/// Wide matrices are padded with zero rows so that `v` always holds a full
/// orthonormal basis of the domain (columns beyond the rank span the null space).
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let (rows, cols) = m.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let k = order.len();
    let mut su = DMatrix::zeros(rows, k);
    let mut sv = DMatrix::zeros(cols, k);
    let mut sigma = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(svd.singular_values[src]);
        for r in 0..rows {
            su[(r, dst)] = u[(r, src)];
        }
        for c in 0..cols {
            sv[(c, dst)] = v_t[(src, c)];
        }
    }
    SortedSvd {
        u: su,
        singular_values: sigma,
        v: sv,
    }
}

/// Outcome of a rank decision.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDecision {
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

impl RankDecision {
    pub fn nullity(&self, cols: usize) -> usize {
        cols - self.rank
    }
}

/// Rank with the crate-wide threshold and gap requirement.
pub fn numerical_rank(m: &DMatrix<f64>) -> Result<RankDecision> {
    decide_rank(sorted_svd(m).singular_values, RANK_REL_TOL, RANK_GAP)
}

/// Decide the rank from sorted singular values.
///
/// Values at or below `rel_tol * σ_max` are rejected. If both accepted and
/// rejected values exist, the smallest accepted must exceed the largest
/// rejected by `gap`, otherwise the decision is reported as ambiguous.
pub fn decide_rank(singular_values: Vec<f64>, rel_tol: f64, gap: f64) -> Result<RankDecision> {
    let smax = singular_values.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(RankDecision {
            rank: 0,
            singular_values,
        });
    }
    let threshold = rel_tol * smax;
    let rank = singular_values.iter().filter(|&&s| s > threshold).count();
    if rank < singular_values.len() {
        let accepted = singular_values[rank - 1];
        let rejected = singular_values[rank];
        if accepted < gap * rejected {
            return Err(Error::AmbiguousRank { singular_values });
        }
    }
    Ok(RankDecision {
        rank,
        singular_values,
    })
}

/// Orthonormal basis (columns) of the column space of `m`.
pub fn column_space(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = sorted_svd(m);
    let rank = decide_rank(svd.singular_values.clone(), RANK_REL_TOL, RANK_GAP)?.rank;
    Ok(svd.u.columns(0, rank).into_owned())
}

/// Orthonormal basis (columns) of the right null space of `m`.
pub fn null_space(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = sorted_svd(m);
    let rank = decide_rank(svd.singular_values.clone(), RANK_REL_TOL, RANK_GAP)?.rank;
    let cols = m.ncols();
    Ok(svd.v.columns(rank, cols - rank).into_owned())
}

/// Largest principal angle (radians) between the spans of two orthonormal bases
/// of equal dimension.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 && b.ncols() == 0 {
        return 0.0;
    }
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    let cross = a.transpose() * b;
    let sv = sorted_svd(&cross).singular_values;
    let smallest = sv.last().copied().unwrap_or(0.0).clamp(0.0, 1.0);
    // acos is ill-conditioned near 1; use the sine of the angle instead.
    (1.0 - smallest * smallest).max(0.0).sqrt().asin()
}

/// Orthonormalize the columns of `m` (assumed independent).
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = sorted_svd(m);
    svd.u.columns(0, m.ncols()).into_owned() * svd.v.transpose()
}
