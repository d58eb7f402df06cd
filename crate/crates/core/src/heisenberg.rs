//! Closed forms on the Heisenberg group `ℍ = ℝ³` with
//! `X₁ = ∂x − (y/2)∂τ`, `X₂ = ∂y + (x/2)∂τ`.
//!
//! Points are `(x, y, τ)` with `z = x + iy`; covectors are `(u, v, α)` with
//! `w = u + iv`. The horizontal velocity of the geodesic is
//! `ζ = ξ + iη = w + iαz/2`.
//!
//! Every `α`-singular quotient is evaluated through an entire function
//! (power series near zero), so all formulas are regular at `α = 0`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::structure::{PhaseState, Structure};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Below this `|θ|` the entire functions are summed as power series.
const SERIES_CUTOFF: f64 = 0.5;
const SERIES_TERMS: usize = 24;

/// Default tolerance on `|φ(α₀)|` for the conjugate test.
pub const CONJUGATE_TOL: f64 = 1e-10;

/// A covector `(u₀, v₀, α₀)` at a base point `(x₀, y₀, τ₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeisCovector {
    pub point: [f64; 3],
    pub covector: [f64; 3],
}

impl HeisCovector {
    pub fn new(point: [f64; 3], covector: [f64; 3]) -> Self {
        Self { point, covector }
    }

    pub fn at_origin(covector: [f64; 3]) -> Self {
        Self::new([0.0; 3], covector)
    }

    pub fn from_slices(point: &[f64], covector: &[f64]) -> Result<Self> {
        let to3 = |what: &'static str, s: &[f64]| -> Result<[f64; 3]> {
            s.try_into().map_err(|_| Error::DimensionMismatch {
                what,
                expected: 3,
                got: s.len(),
            })
        };
        Ok(Self::new(to3("point", point)?, to3("covector", covector)?))
    }

    pub fn x0(&self) -> f64 {
        self.point[0]
    }
    pub fn y0(&self) -> f64 {
        self.point[1]
    }
    pub fn tau0(&self) -> f64 {
        self.point[2]
    }
    pub fn u0(&self) -> f64 {
        self.covector[0]
    }
    pub fn v0(&self) -> f64 {
        self.covector[1]
    }
    pub fn alpha(&self) -> f64 {
        self.covector[2]
    }

    /// `ξ₀ = u₀ − α₀y₀/2`
    pub fn xi0(&self) -> f64 {
        self.u0() - self.alpha() * self.y0() / 2.0
    }
    /// `ξ̃₀ = u₀ + α₀y₀/2`
    pub fn xi_tilde0(&self) -> f64 {
        self.u0() + self.alpha() * self.y0() / 2.0
    }
    /// `η₀ = v₀ + α₀x₀/2`
    pub fn eta0(&self) -> f64 {
        self.v0() + self.alpha() * self.x0() / 2.0
    }
    /// `η̃₀ = v₀ − α₀x₀/2`
    pub fn eta_tilde0(&self) -> f64 {
        self.v0() - self.alpha() * self.x0() / 2.0
    }
    pub fn z0(&self) -> Complex64 {
        Complex64::new(self.x0(), self.y0())
    }
    pub fn w0(&self) -> Complex64 {
        Complex64::new(self.u0(), self.v0())
    }
    /// `ζ₀ = ξ₀ + iη₀`, the initial horizontal velocity.
    pub fn zeta0(&self) -> Complex64 {
        Complex64::new(self.xi0(), self.eta0())
    }

    /// `H = ½(ξ₀² + η₀²)`.
    pub fn hamiltonian(&self) -> f64 {
        0.5 * self.zeta0().norm_sqr()
    }

    pub fn phase_state(&self) -> PhaseState {
        PhaseState::from_slices(&self.point, &self.covector).expect("finite by construction")
    }

    fn with_covector(&self, covector: [f64; 3]) -> Self {
        Self::new(self.point, covector)
    }
}

/// A point of the extremal: `(z, τ)` on the group and `(w, α)` in the fibre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeisState {
    pub z: Complex64,
    pub tau: f64,
    pub w: Complex64,
    pub alpha: f64,
}

impl HeisState {
    pub fn point(&self) -> [f64; 3] {
        [self.z.re, self.z.im, self.tau]
    }

    pub fn covector(&self) -> [f64; 3] {
        [self.w.re, self.w.im, self.alpha]
    }

    pub fn phase_state(&self) -> PhaseState {
        PhaseState::from_slices(&self.point(), &self.covector()).expect("finite state")
    }
}

// Entire functions of θ = α t.

/// `(e^{iθ} − 1)/(iθ)`
fn p_fn(theta: f64) -> Complex64 {
    if theta.abs() < SERIES_CUTOFF {
        let x = I * theta;
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for m in 2..=SERIES_TERMS {
            term = term * x / m as f64;
            sum += term;
        }
        sum
    } else {
        let e = Complex64::from_polar(1.0, theta);
        (e - 1.0) / (I * theta)
    }
}

/// `d/dθ (e^{iθ} − 1)/(iθ)`
fn q_fn(theta: f64) -> Complex64 {
    if theta.abs() < SERIES_CUTOFF {
        // Σ_{m≥2} (m−1) i^{m−1} θ^{m−2} / m!
        let x = I * theta;
        let mut pow = Complex64::new(1.0, 0.0); // (iθ)^{m−2}
        let mut fact = 2.0;
        let mut sum = Complex64::new(0.0, 0.0);
        for m in 2..=SERIES_TERMS {
            if m > 2 {
                pow *= x;
                fact *= m as f64;
            }
            sum += I * pow * ((m - 1) as f64 / fact);
        }
        sum
    } else {
        let e = Complex64::from_polar(1.0, theta);
        (theta * e + I * (e - 1.0)) / (theta * theta)
    }
}

/// Sum `Σ_{k≥1} (−1)^{k+1} a_k θ^{2k−1+shift}` with `a_k` from `coef`.
fn alt_series(theta: f64, shift: i32, coef: impl Fn(usize) -> f64) -> f64 {
    let t2 = theta * theta;
    let mut pow = theta.powi(1 + shift);
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=SERIES_TERMS / 2 {
        sum += sign * coef(k) * pow;
        pow *= t2;
        sign = -sign;
    }
    sum
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `(1 − cos θ)/θ`
fn c1(theta: f64) -> f64 {
    if theta == 0.0 {
        0.0
    } else {
        2.0 * (theta / 2.0).sin().powi(2) / theta
    }
}

/// `d/dθ (1 − cos θ)/θ`
fn c1_prime(theta: f64) -> f64 {
    if theta.abs() < SERIES_CUTOFF {
        alt_series(theta, -1, |k| (2 * k - 1) as f64 / factorial(2 * k))
    } else {
        (theta * theta.sin() - 2.0 * (theta / 2.0).sin().powi(2)) / (theta * theta)
    }
}

/// `(θ − sin θ)/θ²`
fn s_fn(theta: f64) -> f64 {
    if theta.abs() < SERIES_CUTOFF {
        alt_series(theta, 0, |k| 1.0 / factorial(2 * k + 1))
    } else {
        (theta - theta.sin()) / (theta * theta)
    }
}

/// `d/dθ (θ − sin θ)/θ²`
fn s_prime(theta: f64) -> f64 {
    if theta.abs() < SERIES_CUTOFF {
        alt_series(theta, -1, |k| (2 * k - 1) as f64 / factorial(2 * k + 1))
    } else {
        let one_minus_cos = 2.0 * (theta / 2.0).sin().powi(2);
        (one_minus_cos * theta - 2.0 * (theta - theta.sin())) / theta.powi(3)
    }
}

/// The extremal through `hc` at time `t`.
pub fn heis_exp_closed(hc: &HeisCovector, t: f64) -> HeisState {
    let alpha = hc.alpha();
    let theta = alpha * t;
    let e = Complex64::from_polar(1.0, theta);
    let z0 = hc.z0();
    let w0 = hc.w0();
    let zeta0 = hc.zeta0();
    let zw = z0.conj() * w0;

    let z = z0 + zeta0 * t * p_fn(theta);
    let w = 0.5 * w0 * (e + 1.0) + I * (alpha / 4.0) * z0 * (e - 1.0);
    let tau = hc.tau0()
        + 0.5 * zw.im * t
        + 0.5 * zw.re * t * c1(theta)
        + z0.norm_sqr() * (theta + theta.sin()) / 8.0
        + 0.5 * w0.norm_sqr() * t * t * s_fn(theta);
    HeisState { z, tau, w, alpha }
}

/// `exp_p(λ₀)` from the closed form.
pub fn heis_exp_point(hc: &HeisCovector) -> [f64; 3] {
    heis_exp_closed(hc, 1.0).point()
}

/// `(x,y,τ)·(x′,y′,τ′) = (x+x′, y+y′, τ+τ′ − ½ Im[z z̄′])`.
pub fn heis_group_law(g: [f64; 3], h: [f64; 3]) -> [f64; 3] {
    let im = g[1] * h[0] - g[0] * h[1];
    [g[0] + h[0], g[1] + h[1], g[2] + h[2] - 0.5 * im]
}

pub fn heis_inverse(g: [f64; 3]) -> [f64; 3] {
    [-g[0], -g[1], -g[2]]
}

/// Transport a covector at the origin to `g` by the inverse transpose of
/// the differential of left translation by `g`.
pub fn left_translate_covector(g: [f64; 3], covector: [f64; 3]) -> [f64; 3] {
    let [u, v, alpha] = covector;
    [u + alpha * g[1] / 2.0, v - alpha * g[0] / 2.0, alpha]
}

/// The fundamental matrix `M(t)` of the variational equation, in
/// `(u, v, α, x, y, τ)` order for both rows and columns.
pub fn heis_jacobi_matrix(hc: &HeisCovector, t: f64) -> DMatrix<f64> {
    let alpha = hc.alpha();
    let theta = alpha * t;
    let e = Complex64::from_polar(1.0, theta);
    let (x0, y0) = (hc.x0(), hc.y0());
    let (u0, v0) = (hc.u0(), hc.v0());
    let z0 = hc.z0();
    let w0 = hc.w0();
    let zeta0 = hc.zeta0();
    let zw = z0.conj() * w0;
    let p = p_fn(theta);
    let q = q_fn(theta);
    let c1t = t * c1(theta);
    let s2 = t * t * s_fn(theta);
    let plus = theta + theta.sin();

    let dtau_du = -y0 * t / 2.0 + x0 * c1t / 2.0 + u0 * s2;
    let dtau_dv = x0 * t / 2.0 + y0 * c1t / 2.0 + v0 * s2;
    let dtau_dalpha = 0.5 * zw.re * t * t * c1_prime(theta)
        + z0.norm_sqr() * t * (1.0 + theta.cos()) / 8.0
        + 0.5 * w0.norm_sqr() * t.powi(3) * s_prime(theta);
    let dtau_dx = v0 * t / 2.0 + u0 * c1t / 2.0 + x0 * plus / 4.0;
    let dtau_dy = -u0 * t / 2.0 + v0 * c1t / 2.0 + y0 * plus / 4.0;

    let half_e1 = (e + 1.0) / 2.0;
    // (δw, δα, δz, δτ) per initial perturbation
    let columns: [(Complex64, f64, Complex64, f64); 6] = [
        (half_e1, 0.0, t * p, dtau_du),
        (I * half_e1, 0.0, I * t * p, dtau_dv),
        (
            I * z0 * (e - 1.0) / 4.0 + I * t * zeta0 * e / 2.0,
            1.0,
            I * z0 * t * p / 2.0 + zeta0 * t * t * q,
            dtau_dalpha,
        ),
        (-alpha * theta * p / 4.0, 0.0, half_e1, dtau_dx),
        (-alpha * (e - 1.0) / 4.0, 0.0, I * half_e1, dtau_dy),
        (Complex64::new(0.0, 0.0), 0.0, Complex64::new(0.0, 0.0), 1.0),
    ];
    let mut m = DMatrix::zeros(6, 6);
    for (j, (dw, da, dz, dtau)) in columns.iter().enumerate() {
        m[(0, j)] = dw.re;
        m[(1, j)] = dw.im;
        m[(2, j)] = *da;
        m[(3, j)] = dz.re;
        m[(4, j)] = dz.im;
        m[(5, j)] = *dtau;
    }
    m
}

/// `d_{λ₀} exp_p`: the `(x, y, τ) × (u, v, α)` block of `M(1)`.
pub fn heis_d_exp(hc: &HeisCovector) -> Matrix3<f64> {
    let m = heis_jacobi_matrix(hc, 1.0);
    Matrix3::from_fn(|i, j| m[(3 + i, j)])
}

/// The nine non-trivial entries `f₁ … f₉` of `M(t)` in the explicit
/// trigonometric form: `f₁, f₂` are `∂(u, v)/∂α₀`, `f₃, f₄` are
/// `∂(x, y)/∂α₀`, and `f₅ … f₉` are `∂τ/∂(u₀, v₀, α₀, x₀, y₀)`.
/// Requires `α₀ ≠ 0`.
pub fn jacobi_matrix_entries(hc: &HeisCovector, t: f64) -> Result<[f64; 9]> {
    let a = hc.alpha();
    if a == 0.0 {
        return Err(Error::InvalidArgument(
            "the explicit entries are singular at alpha = 0".into(),
        ));
    }
    let (x0, y0, u0, v0) = (hc.x0(), hc.y0(), hc.u0(), hc.v0());
    let (xi, eta) = (hc.xi0(), hc.eta0());
    let c = (a * t).cos();
    let s = (a * t).sin();
    let z2 = x0 * x0 + y0 * y0;
    let w2 = u0 * u0 + v0 * v0;
    let zw = x0 * u0 + y0 * v0;
    let a2 = a * a;
    Ok([
        (y0 - (2.0 * t * eta + y0) * c - (2.0 * t * xi + x0) * s) / 4.0,
        (-x0 + (2.0 * t * xi + x0) * c - (2.0 * t * eta + y0) * s) / 4.0,
        (v0 - (v0 - t * a * xi) * c - (u0 + t * a * eta) * s) / a2,
        (-u0 + (u0 + t * a * eta) * c - (v0 - t * a * xi) * s) / a2,
        (2.0 * a * t * xi + a * x0 * (1.0 - c) - 2.0 * u0 * s) / (2.0 * a2),
        (2.0 * a * t * eta + a * y0 * (1.0 - c) - 2.0 * v0 * s) / (2.0 * a2),
        (a * (t * (a2 * z2 - 4.0 * w2) * (1.0 + c) - 4.0 * zw * (1.0 - c))
            + 4.0 * (2.0 * w2 + t * a2 * zw) * s)
            / (8.0 * a2 * a),
        (2.0 * a * t * eta + 2.0 * u0 * (1.0 - c) + a * x0 * s) / (4.0 * a),
        (-2.0 * a * t * xi + 2.0 * v0 * (1.0 - c) + a * y0 * s) / (4.0 * a),
    ])
}

/// `φ(α) = α sin α + 2 cos α − 2`.
pub fn conjugate_condition(alpha: f64) -> f64 {
    alpha * alpha.sin() + 2.0 * alpha.cos() - 2.0
}

/// `φ(α) = 2 sin(α/2) · g(α)` with `g(α) = α cos(α/2) − 2 sin(α/2)`.
fn g_factor(alpha: f64) -> f64 {
    alpha * (alpha / 2.0).cos() - 2.0 * (alpha / 2.0).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootBranch {
    /// `α = 2πk`
    SinZero,
    /// `tan(α/2) = α/2`
    SinNonzero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateRoot {
    pub alpha: f64,
    pub branch: RootBranch,
}

fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All roots of `φ` in `(0, limit]`, sorted.
pub fn heis_conjugate_roots(limit: f64) -> Vec<ConjugateRoot> {
    let mut roots = Vec::new();
    let mut k = 1;
    loop {
        let base = TAU * k as f64;
        if base > limit {
            break;
        }
        roots.push(ConjugateRoot {
            alpha: base,
            branch: RootBranch::SinZero,
        });
        // g changes sign on (2πk, 2πk + π) and has exactly one root there
        let root = bisect(g_factor, base, base + PI, 1e-14);
        if root <= limit {
            roots.push(ConjugateRoot {
                alpha: root,
                branch: RootBranch::SinNonzero,
            });
        }
        k += 1;
    }
    roots
}

/// Classification of a covector with respect to the conjugate locus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConjugateClass {
    NotConjugate,
    /// `sin α₀ ≠ 0`: fold point, kernel transverse to the locus.
    C0 { kernel: [f64; 3] },
    /// `sin α₀ = 0`: kernel tangent to the locus.
    C1 { kernel: [f64; 3] },
}

impl ConjugateClass {
    pub fn is_conjugate(&self) -> bool {
        !matches!(self, ConjugateClass::NotConjugate)
    }

    pub fn kernel(&self) -> Option<[f64; 3]> {
        match self {
            ConjugateClass::NotConjugate => None,
            ConjugateClass::C0 { kernel } | ConjugateClass::C1 { kernel } => Some(*kernel),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ConjugateClass::NotConjugate => "-",
            ConjugateClass::C0 { .. } => "C0",
            ConjugateClass::C1 { .. } => "C1",
        }
    }
}

pub fn classify_conjugate(hc: &HeisCovector) -> Result<ConjugateClass> {
    classify_conjugate_with_tol(hc, CONJUGATE_TOL)
}

/// As [`classify_conjugate`] with an explicit tolerance on `|φ(α₀)|`.
pub fn classify_conjugate_with_tol(hc: &HeisCovector, tol: f64) -> Result<ConjugateClass> {
    if hc.hamiltonian() == 0.0 {
        return Err(Error::ZeroHamiltonian);
    }
    let a = hc.alpha();
    if a == 0.0 || conjugate_condition(a).abs() > tol {
        return Ok(ConjugateClass::NotConjugate);
    }
    let (xi, eta) = (hc.xi0(), hc.eta0());
    // whichever factor of φ = 2 sin(α/2) g(α) is smaller is the one vanishing
    if (2.0 * (a / 2.0).sin()).abs() <= g_factor(a).abs() {
        Ok(ConjugateClass::C1 {
            kernel: [-eta, xi, 0.0],
        })
    } else {
        Ok(ConjugateClass::C0 {
            kernel: [(eta + hc.y0()) / 2.0, -(xi + hc.x0()) / 2.0, 1.0],
        })
    }
}

/// `H(λ₀)/(2α₀²) · [2 − (2 + α₀²) cos α₀]`, proportional to
/// `d/dt det(d_{tλ₀} exp_p)` at `t = 1` (the factor is `4/α₀²`).
pub fn fold_derivative(hc: &HeisCovector) -> Result<f64> {
    let a = hc.alpha();
    if a == 0.0 {
        return Err(Error::InvalidArgument("fold derivative needs alpha != 0".into()));
    }
    Ok(hc.hamiltonian() / (2.0 * a * a) * (2.0 - (2.0 + a * a) * a.cos()))
}

/// Two distinct covectors near a conjugate covector with the same image.
#[derive(Debug, Clone, PartialEq)]
pub struct Collision {
    pub lambda1: [f64; 3],
    pub lambda2: [f64; 3],
    pub image1: [f64; 3],
    pub image2: [f64; 3],
    pub gap: f64,
    pub separation: f64,
    pub iterations: usize,
}

const COLLISION_BUDGET: usize = 200;
const COLLISION_GAP: f64 = 1e-12;

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    Vector3::from(a).metric_distance(&Vector3::from(b))
}

fn make_collision(hc: &HeisCovector, l1: [f64; 3], l2: [f64; 3], iterations: usize) -> Collision {
    let image1 = heis_exp_point(&hc.with_covector(l1));
    let image2 = heis_exp_point(&hc.with_covector(l2));
    Collision {
        lambda1: l1,
        lambda2: l2,
        image1,
        image2,
        gap: dist(image1, image2),
        separation: dist(l1, l2),
        iterations,
    }
}

/// Search for `λ₁ ≠ λ₂` within `radius` of the conjugate covector `hc` with
/// `exp(λ₁) = exp(λ₂)`.
///
/// On the `C¹` branch the whole circle `|ζ₀| = const`, `α₀ = 2πk` is mapped
/// to one point, so the pair is read off that circle. On the `C⁰` branch the
/// pair straddles the fold along the kernel direction and is found by Newton
/// iteration with the closed-form Jacobian.
pub fn find_collision(hc: &HeisCovector, radius: f64) -> Result<Collision> {
    find_collision_with_tol(hc, radius, CONJUGATE_TOL)
}

pub fn find_collision_with_tol(hc: &HeisCovector, radius: f64, tol: f64) -> Result<Collision> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    match classify_conjugate_with_tol(hc, tol)? {
        ConjugateClass::NotConjugate => Err(Error::NotConjugate),
        ConjugateClass::C1 { .. } => Ok(collision_on_circle(hc, radius)),
        ConjugateClass::C0 { kernel } => collision_across_fold(hc, radius, kernel),
    }
}

fn collision_on_circle(hc: &HeisCovector, radius: f64) -> Collision {
    // snap α to the exact multiple of 2π
    let k = (hc.alpha() / TAU).round();
    let alpha = TAU * k;
    let snapped = hc.with_covector([hc.u0(), hc.v0(), alpha]);
    let centre = Complex64::new(alpha * hc.y0() / 2.0, -alpha * hc.x0() / 2.0);
    let zeta = snapped.zeta0();
    let rho = zeta.norm();
    let angle = 2.0 * (radius / (4.0 * rho)).min(1.0).asin();
    let w2 = centre + zeta * Complex64::from_polar(1.0, angle);
    make_collision(
        hc,
        snapped.covector,
        [w2.re, w2.im, alpha],
        0,
    )
}

fn collision_across_fold(hc: &HeisCovector, radius: f64, kernel: [f64; 3]) -> Result<Collision> {
    let l0 = Vector3::from(hc.covector);
    let dir = Vector3::from(kernel).normalize();
    let mut iterations = 0;
    let mut best_gap = f64::INFINITY;
    let mut s = radius / 2.0;

    while iterations < COLLISION_BUDGET {
        let l2 = l0 - dir * s;
        let target = Vector3::from(heis_exp_point(&hc.with_covector(l2.into())));
        let mut l1 = l0 + dir * s;
        let residual = |l: &Vector3<f64>| {
            Vector3::from(heis_exp_point(&hc.with_covector((*l).into()))) - target
        };
        let mut f = residual(&l1);
        let mut converged = false;
        while iterations < COLLISION_BUDGET {
            iterations += 1;
            let gap = f.norm();
            best_gap = best_gap.min(gap);
            if gap <= COLLISION_GAP {
                converged = true;
                break;
            }
            let jac = heis_d_exp(&hc.with_covector(l1.into()));
            let Some(step) = jac.lu().solve(&f) else {
                break;
            };
            // damped Newton: halve until the residual decreases
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial = l1 - step * lambda;
                let ft = residual(&trial);
                if ft.norm() < gap {
                    l1 = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if converged
            && (l1 - l0).norm() <= radius
            && (l1 - l2).norm() >= radius / 4.0
        {
            return Ok(make_collision(hc, l1.into(), l2.into(), iterations));
        }
        s *= 0.7;
    }
    Err(Error::SearchFailure {
        iterations,
        best_gap,
    })
}

/// One cell of a conjugate-locus scan over `(u₀, α₀)` at the origin with
/// `v₀` fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct LocusRow {
    pub u0: f64,
    pub v0: f64,
    pub alpha0: f64,
    pub class: ConjugateClass,
    /// Conjugacy as decided from the singular values of the numeric `d exp`.
    pub numeric_conjugate: bool,
    /// `σ_min / σ_max` of the numeric `d exp`.
    pub sigma_ratio: f64,
}

impl LocusRow {
    pub fn agrees(&self) -> bool {
        self.class.is_conjugate() == self.numeric_conjugate
    }
}

/// Uniform grid of `n` values: `[lo, hi]` inclusive, or `(lo, hi]` when
/// `open_low` is set.
pub fn grid_values(lo: f64, hi: f64, n: usize, open_low: bool) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    if open_low {
        (1..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    } else {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Classify every `(u₀, α₀)` grid cell twice: by `φ(α₀)` and by an SVD rank
/// decision on the numerically integrated `d exp`. Rows come out in grid
/// order (`u₀` major).
pub fn locus_scan(
    u_values: &[f64],
    alpha_values: &[f64],
    v0: f64,
    tol: f64,
) -> Result<Vec<LocusRow>> {
    let s = Structure::heisenberg();
    let cells: Vec<(f64, f64)> = u_values
        .iter()
        .flat_map(|&u| alpha_values.iter().map(move |&a| (u, a)))
        .collect();
    cells
        .par_iter()
        .map(|&(u0, alpha0)| {
            let hc = HeisCovector::at_origin([u0, v0, alpha0]);
            let class = classify_conjugate(&hc)?;
            let d = crate::flow::d_exp(&s, &[0.0; 3], &hc.covector, tol)?;
            let sv = crate::linalg::sorted_svd(&d).singular_values;
            let decision = crate::linalg::decide_rank(
                sv.clone(),
                crate::linalg::RANK_REL_TOL,
                crate::linalg::RANK_GAP,
            )?;
            Ok(LocusRow {
                u0,
                v0,
                alpha0,
                class,
                numeric_conjugate: decision.rank < 3,
                sigma_ratio: sv[2] / sv[0],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::integrate_extremal_at;
    use crate::linalg::{max_abs, symplectic_defect};

    const ALPHA_STAR: f64 = 8.986818915818128;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn sample_covectors() -> Vec<HeisCovector> {
        vec![
            HeisCovector::new([0.0; 3], [1.0, 0.0, TAU]),
            HeisCovector::new([0.4, -0.3, 0.1], [0.3, 0.8, 2.5]),
            HeisCovector::new([-1.0, 0.5, 2.0], [-1.2, 0.4, -7.0]),
            HeisCovector::new([0.2, 0.1, 0.0], [0.5, -0.5, 1e-7]),
            HeisCovector::new([0.2, 0.1, 0.0], [0.5, -0.5, 0.0]),
            HeisCovector::new([0.7, -0.2, 0.3], [0.9, 0.1, 0.3]),
        ]
    }

    #[test]
    fn series_helpers_match_direct_forms() {
        for &th in &[0.49, -0.3, 0.1, 1e-3] {
            let e = Complex64::from_polar(1.0, th);
            let p = (e - 1.0) / (I * th);
            assert!((p_fn(th) - p).norm() < 1e-13, "{th}");
            let q = (th * e + I * (e - 1.0)) / (th * th);
            assert!((q_fn(th) - q).norm() < 1e-10, "{th}");
            assert!(close(s_fn(th), (th - th.sin()) / (th * th), 1e-10));
            let c1p = (th * th.sin() - (1.0 - th.cos())) / (th * th);
            assert!(close(c1_prime(th), c1p, 1e-9));
            let sp = ((1.0 - th.cos()) * th - 2.0 * (th - th.sin())) / th.powi(3);
            assert!(close(s_prime(th), sp, 1e-7));
        }
        // continuity across the cutoff
        for f in [c1_prime, s_fn, s_prime] {
            let a = f(SERIES_CUTOFF - 1e-12);
            let b = f(SERIES_CUTOFF + 1e-12);
            assert!(close(a, b, 1e-12));
        }
        assert!((p_fn(SERIES_CUTOFF - 1e-12) - p_fn(SERIES_CUTOFF + 1e-12)).norm() < 1e-12);
        assert!((q_fn(SERIES_CUTOFF - 1e-12) - q_fn(SERIES_CUTOFF + 1e-12)).norm() < 1e-12);
    }

    #[test]
    fn closed_form_examples() {
        let st = heis_exp_closed(&HeisCovector::at_origin([1.0, 0.0, 0.0]), 1.0);
        assert!(close(st.z.re, 1.0, 1e-15) && close(st.z.im, 0.0, 1e-15));
        assert_eq!(st.tau, 0.0);

        let st = heis_exp_closed(&HeisCovector::at_origin([1.0, 0.0, TAU]), 1.0);
        assert!(st.z.norm() < 1e-15);
        assert!(close(st.tau, 1.0 / (4.0 * PI), 1e-15));

        for hc in sample_covectors() {
            let st = heis_exp_closed(&hc, 0.0);
            assert_eq!(st.point(), hc.point);
            assert_eq!(st.covector(), hc.covector);
        }
    }

    #[test]
    fn closed_form_matches_numeric_flow() {
        let s = Structure::heisenberg();
        let times: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        for hc in sample_covectors() {
            let traj = integrate_extremal_at(&s, &hc.point, &hc.covector, &times, 1e-11).unwrap();
            for (t, st) in traj.times().iter().zip(traj.states()) {
                let cf = heis_exp_closed(&hc, *t).phase_state();
                assert!((&cf.q - &st.q).amax() < 1e-9, "{hc:?} t={t}");
                assert!((&cf.p - &st.p).amax() < 1e-9, "{hc:?} t={t}");
            }
        }
    }

    #[test]
    fn fundamental_matrix_matches_numeric_flow() {
        let s = Structure::heisenberg();
        for hc in sample_covectors() {
            let traj = integrate_extremal_at(&s, &hc.point, &hc.covector, &[0.37, 1.0], 1e-11)
                .unwrap();
            for t in [0.37, 1.0] {
                let (_, phi) = traj.sample_at(t).unwrap();
                let m = heis_jacobi_matrix(&hc, t);
                assert!(max_abs(&(m - phi)) < 1e-8, "{hc:?} t={t}");
            }
        }
    }

    #[test]
    fn fundamental_matrix_is_symplectic_and_starts_at_identity() {
        for hc in sample_covectors() {
            assert_eq!(heis_jacobi_matrix(&hc, 0.0), DMatrix::identity(6, 6));
            for t in [0.1, 0.5, 1.0, 3.0] {
                assert!(symplectic_defect(&heis_jacobi_matrix(&hc, t)) < 1e-12);
            }
        }
        let m = heis_jacobi_matrix(&HeisCovector::at_origin([1.0, 0.0, TAU]), 1.0);
        assert!(close(m[(0, 0)], 1.0, 1e-15));
    }

    #[test]
    fn explicit_entries_agree_with_matrix() {
        let slots = [
            (0, 2),
            (1, 2),
            (3, 2),
            (4, 2),
            (5, 0),
            (5, 1),
            (5, 2),
            (5, 3),
            (5, 4),
        ];
        for hc in sample_covectors() {
            if hc.alpha().abs() < 1e-3 {
                assert!(hc.alpha() != 0.0 || jacobi_matrix_entries(&hc, 1.0).is_err());
                continue;
            }
            for t in [0.3, 1.0] {
                let m = heis_jacobi_matrix(&hc, t);
                let f = jacobi_matrix_entries(&hc, t).unwrap();
                for (k, &(i, j)) in slots.iter().enumerate() {
                    assert!(close(m[(i, j)], f[k], 1e-11), "f{} {hc:?}", k + 1);
                }
            }
        }
    }

    #[test]
    fn matrix_is_continuous_at_alpha_zero() {
        let a = heis_jacobi_matrix(&HeisCovector::new([0.3, -0.1, 0.0], [0.5, 0.2, 0.0]), 0.8);
        let b = heis_jacobi_matrix(&HeisCovector::new([0.3, -0.1, 0.0], [0.5, 0.2, 1e-9]), 0.8);
        assert!(max_abs(&(a - b)) < 1e-8);
    }

    #[test]
    fn group_law_examples() {
        let g = [0.3, -1.2, 0.7];
        assert_eq!(heis_group_law(g, [0.0; 3]), g);
        assert_eq!(heis_group_law(g, heis_inverse(g)), [0.0; 3]);
        assert_eq!(heis_group_law([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), [1.0, 1.0, 0.5]);
    }

    #[test]
    fn left_invariance() {
        let g = [0.4, -0.7, 1.1];
        for cov in [[1.0, 0.0, TAU], [0.3, -0.8, 2.2], [-0.5, 0.5, 0.0]] {
            let at_origin = heis_exp_point(&HeisCovector::at_origin(cov));
            let moved = heis_exp_point(&HeisCovector::new(g, left_translate_covector(g, cov)));
            let want = heis_group_law(g, at_origin);
            assert!(dist(moved, want) < 1e-12, "{moved:?} {want:?}");
        }
    }

    #[test]
    fn conjugate_roots() {
        let roots = heis_conjugate_roots(10.0);
        assert_eq!(roots.len(), 2);
        assert_eq!(roots[0].alpha, TAU);
        assert_eq!(roots[0].branch, RootBranch::SinZero);
        assert!(close(roots[1].alpha, ALPHA_STAR, 1e-12));
        assert_eq!(roots[1].branch, RootBranch::SinNonzero);
        assert!(heis_conjugate_roots(5.0).is_empty());
        assert!(conjugate_condition(TAU).abs() < 1e-14);
        // no sign change of φ on (0, 2π)
        let mut a = 1e-3;
        while a < TAU - 1e-3 {
            assert!(conjugate_condition(a) < 0.0, "{a}");
            a += 1e-3;
        }
        let r20 = heis_conjugate_roots(20.0);
        assert_eq!(r20.len(), 5);
        assert!(r20.windows(2).all(|w| w[0].alpha < w[1].alpha));
    }

    #[test]
    fn classification_examples() {
        let c = classify_conjugate(&HeisCovector::at_origin([1.0, 0.0, TAU])).unwrap();
        assert_eq!(c, ConjugateClass::C1 { kernel: [-0.0, 1.0, 0.0] });
        let c = classify_conjugate(&HeisCovector::at_origin([1.0, 0.0, PI])).unwrap();
        assert_eq!(c, ConjugateClass::NotConjugate);
        let c = classify_conjugate(&HeisCovector::at_origin([1.0, 0.0, ALPHA_STAR])).unwrap();
        match c {
            ConjugateClass::C0 { kernel } => assert_eq!(kernel[2], 1.0),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            classify_conjugate(&HeisCovector::at_origin([0.0, 0.0, 1.0])),
            Err(Error::ZeroHamiltonian)
        ));
    }

    #[test]
    fn kernels_annihilate_d_exp() {
        for point in [[0.0; 3], [0.4, -0.3, 0.1]] {
            for (u, v) in [(1.0, 0.0), (0.3, 0.8)] {
                for a in [TAU, ALPHA_STAR, 2.0 * TAU] {
                    let hc = HeisCovector::new(point, [u, v, a]);
                    let k = classify_conjugate(&hc).unwrap().kernel().unwrap();
                    let k = Vector3::from(k).normalize();
                    let d = heis_d_exp(&hc);
                    assert!((d * k).norm() < 1e-12, "{hc:?}");
                }
            }
        }
    }

    #[test]
    fn fold_derivative_is_proportional_to_det_slope() {
        for point in [[0.0; 3], [0.4, -0.3, 0.1]] {
            for (u, v) in [(1.0, 0.0), (0.3, 0.8)] {
                for a in [TAU, ALPHA_STAR] {
                    let hc = HeisCovector::new(point, [u, v, a]);
                    let det = |t: f64| heis_d_exp(&hc.with_covector([t * u, t * v, t * a])).determinant();
                    let h = 1e-5;
                    let slope = (det(1.0 + h) - det(1.0 - h)) / (2.0 * h);
                    let fd = fold_derivative(&hc).unwrap();
                    assert!(close(slope, 4.0 / (a * a) * fd, 1e-7 * fd.abs().max(1.0)));
                }
            }
        }
        assert_eq!(fold_derivative(&HeisCovector::at_origin([0.0, 0.0, 3.0])).unwrap(), 0.0);
        assert!(fold_derivative(&HeisCovector::at_origin([1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn collision_on_circle_branch() {
        let hc = HeisCovector::at_origin([1.0, 0.0, TAU]);
        let c = find_collision(&hc, 1.0).unwrap();
        assert!(c.gap < 1e-12);
        let angle = c.lambda2[1].atan2(c.lambda2[0]);
        assert!(angle >= 0.1, "{angle}");
        assert!(close(c.image1[2], 1.0 / (4.0 * PI), 1e-15));
        let off = HeisCovector::new([0.5, -0.2, 0.0], [0.3, 0.4, TAU]);
        let c = find_collision(&off, 0.3).unwrap();
        assert!(c.gap < 1e-12 && c.separation >= 0.3 / 4.0);
    }

    #[test]
    fn collision_across_fold() {
        let hc = HeisCovector::at_origin([1.0, 0.0, ALPHA_STAR]);
        for radius in [0.5, 0.1, 0.02] {
            let c = find_collision(&hc, radius).unwrap();
            assert!(c.gap <= 1e-9, "{c:?}");
            assert!(c.separation >= radius / 4.0);
            assert!(dist(c.lambda1, hc.covector) <= radius);
            assert!(dist(c.lambda2, hc.covector) <= radius);
        }
    }

    #[test]
    fn collision_rejects_bad_input() {
        let hc = HeisCovector::at_origin([1.0, 0.0, PI]);
        assert!(matches!(find_collision(&hc, 0.5), Err(Error::NotConjugate)));
        let hc = HeisCovector::at_origin([1.0, 0.0, TAU]);
        assert!(find_collision(&hc, 0.0).is_err());
    }

    #[test]
    fn small_locus_scan_agrees() {
        let u = grid_values(0.2, 2.0, 3, false);
        let a = grid_values(0.0, 10.0, 4, true);
        let rows = locus_scan(&u, &a, 0.0, 1e-10).unwrap();
        assert_eq!(rows.len(), 12);
        assert!(rows.iter().all(LocusRow::agrees));
        assert_eq!((rows[0].u0, rows[0].alpha0), (0.2, 2.5));
    }
}
