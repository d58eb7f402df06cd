//! Lagrangian subspaces, Jacobi curves and Maslov indices.
//!
//! A Lagrangian subspace of `(ℝ²ⁿ, ω)` is stored as a `2n × n` frame whose
//! columns span it. The Jacobi curve of an extremal is
//! `J(t) = Φ(t)⁻¹ Ver` and its evolution curve is `L(t) = Φ(t) Ver`, where
//! `Ver = span [I; 0]` in `(δp, δq)` order. Conjugate times are the
//! crossings of either curve with `Ver`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{integrate_extremal_at, ExtremalTrajectory};
use crate::linalg::{self, decide_rank, sorted_svd, symplectic_form, RANK_GAP, RANK_REL_TOL};
use crate::structure::Structure;

/// Grid cells per sweep when bracketing crossings.
pub const SWEEP_CELLS: usize = 1000;
/// Crossing times are refined until the bracket is this small (relative).
pub const ROOT_TOL: f64 = 1e-10;
/// Two crossings closer than this are reported as an unresolved cluster.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Finite-difference step for crossing forms, relative to the bracket width.
pub const FD_STEP: f64 = 1e-4;

/// Isotropy tolerance: `‖FᵀΩF‖ ≤ 1e-9 ‖F‖²`.
const ISOTROPY_TOL: f64 = 1e-9;
/// Grid minima of `σ_min` below this are examined for touching crossings.
const TOUCH_CANDIDATE: f64 = 0.05;

/// A frame whose columns span a Lagrangian subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianFrame {
    f: DMatrix<f64>,
}

impl LagrangianFrame {
    pub fn new(f: DMatrix<f64>) -> Result<Self> {
        let (rows, n) = f.shape();
        if rows != 2 * n || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "a Lagrangian frame must be 2n x n, got {rows} x {n}"
            )));
        }
        if linalg::numerical_rank(&f)?.rank != n {
            return Err(Error::InvalidArgument("Lagrangian frame is rank deficient".into()));
        }
        let frame = Self { f };
        if frame.isotropy_defect() > ISOTROPY_TOL {
            return Err(Error::InvalidArgument(format!(
                "frame is not isotropic (defect {:e})",
                frame.isotropy_defect()
            )));
        }
        Ok(frame)
    }

    pub(crate) fn new_unchecked(f: DMatrix<f64>) -> Self {
        Self { f }
    }

    /// `span [I; 0]`, the vertical subspace.
    pub fn vertical(n: usize) -> Self {
        let mut f = DMatrix::zeros(2 * n, n);
        f.view_mut((0, 0), (n, n)).fill_with_identity();
        Self { f }
    }

    /// `span [0; I]`.
    pub fn horizontal(n: usize) -> Self {
        let mut f = DMatrix::zeros(2 * n, n);
        f.view_mut((n, 0), (n, n)).fill_with_identity();
        Self { f }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn n(&self) -> usize {
        self.f.ncols()
    }

    /// `‖FᵀΩF‖_∞ / ‖F‖²` (Frobenius norm).
    pub fn isotropy_defect(&self) -> f64 {
        let omega = symplectic_form(self.n());
        let gram = self.f.transpose() * omega * &self.f;
        linalg::max_abs(&gram) / self.f.norm_squared()
    }

    /// The orthonormal frame `F (FᵀF)^{-1/2}` spanning the same subspace.
    pub fn orthonormal(&self) -> DMatrix<f64> {
        polar(&self.f)
    }
}

fn polar(f: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = sorted_svd(f);
    let n = f.ncols();
    svd.u.columns(0, n) * svd.v.transpose()
}

/// `dim(span F ∩ span G) = 2n − rank [F | G]`.
pub fn intersection_dim(f: &LagrangianFrame, g: &LagrangianFrame) -> Result<usize> {
    let n = f.n();
    if g.n() != n {
        return Err(Error::DimensionMismatch {
            what: "Lagrangian frame",
            expected: n,
            got: g.n(),
        });
    }
    let mut both = DMatrix::zeros(2 * n, 2 * n);
    both.view_mut((0, 0), (2 * n, n)).copy_from(&f.orthonormal());
    both.view_mut((0, n), (2 * n, n)).copy_from(&g.orthonormal());
    Ok(2 * n - linalg::numerical_rank(&both)?.rank)
}

/// A continuous curve of Lagrangian frames on a closed interval.
pub trait LagrangianPath: Sync {
    fn n(&self) -> usize;
    fn domain(&self) -> (f64, f64);
    fn frame(&self, t: f64) -> Result<DMatrix<f64>>;
}

/// Which Lagrangian curve of an extremal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurveKind {
    /// `J(t) = Φ(t)⁻¹ Ver`, transported back to the initial fibre.
    Jacobi,
    /// `L(t) = Φ(t) Ver`, the vertical space carried forward.
    Evolution,
}

/// `Φ⁻¹ [I; 0] = [Φ_xxᵀ; −Φ_xpᵀ]` for symplectic `Φ`.
fn jacobi_frame(phi: &DMatrix<f64>) -> DMatrix<f64> {
    let n = phi.nrows() / 2;
    let mut f = DMatrix::zeros(2 * n, n);
    f.view_mut((0, 0), (n, n))
        .copy_from(&phi.view((n, n), (n, n)).transpose());
    f.view_mut((n, 0), (n, n))
        .copy_from(&(-phi.view((n, 0), (n, n)).transpose()));
    f
}

fn evolution_frame(phi: &DMatrix<f64>) -> DMatrix<f64> {
    let n = phi.nrows() / 2;
    phi.columns(0, n).into_owned()
}

/// The Jacobi or evolution curve of a trajectory.
#[derive(Debug, Clone)]
pub struct JacobiCurve {
    traj: ExtremalTrajectory,
    kind: CurveKind,
}

impl JacobiCurve {
    pub fn new(traj: ExtremalTrajectory, kind: CurveKind) -> Self {
        Self { traj, kind }
    }

    pub fn trajectory(&self) -> &ExtremalTrajectory {
        &self.traj
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn samples(&self, times: &[f64]) -> Result<JacobiCurveSamples> {
        let frames = times
            .iter()
            .map(|&t| Ok(LagrangianFrame::new_unchecked(self.frame(t)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(JacobiCurveSamples {
            point: self.traj.point().clone(),
            covector: self.traj.covector().clone(),
            kind: self.kind,
            times: times.to_vec(),
            frames,
        })
    }
}

impl LagrangianPath for JacobiCurve {
    fn n(&self) -> usize {
        self.traj.dim()
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, self.traj.t_end())
    }

    fn frame(&self, t: f64) -> Result<DMatrix<f64>> {
        let (_, phi) = self.traj.sample_at(t)?;
        Ok(match self.kind {
            CurveKind::Jacobi => jacobi_frame(&phi),
            CurveKind::Evolution => evolution_frame(&phi),
        })
    }
}

/// Frames of a Jacobi or evolution curve on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiCurveSamples {
    pub point: DVector<f64>,
    pub covector: DVector<f64>,
    pub kind: CurveKind,
    pub times: Vec<f64>,
    pub frames: Vec<LagrangianFrame>,
}

/// `J(t)` as a checked Lagrangian frame.
pub fn jacobi_curve(traj: &ExtremalTrajectory, t: f64) -> Result<LagrangianFrame> {
    let (_, phi) = traj.sample_at(t)?;
    LagrangianFrame::new(jacobi_frame(&phi))
}

/// `L(t)` as a checked Lagrangian frame.
pub fn l_curve(traj: &ExtremalTrajectory, t: f64) -> Result<LagrangianFrame> {
    let (_, phi) = traj.sample_at(t)?;
    LagrangianFrame::new(evolution_frame(&phi))
}

/// `t ↦ Λ(σ(t))` for an increasing map `σ` of `domain` onto the inner domain.
pub struct Reparametrized<'a, C: LagrangianPath> {
    inner: &'a C,
    sigma: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
    domain: (f64, f64),
}

impl<'a, C: LagrangianPath> Reparametrized<'a, C> {
    pub fn new(
        inner: &'a C,
        domain: (f64, f64),
        sigma: impl Fn(f64) -> f64 + Sync + 'a,
    ) -> Self {
        Self {
            inner,
            sigma: Box::new(sigma),
            domain,
        }
    }
}

impl<C: LagrangianPath> LagrangianPath for Reparametrized<'_, C> {
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
    fn frame(&self, t: f64) -> Result<DMatrix<f64>> {
        self.inner.frame((self.sigma)(t))
    }
}

/// `t ↦ Λ(a + b − t)`.
pub struct Reversed<'a, C: LagrangianPath>(pub &'a C);

impl<C: LagrangianPath> LagrangianPath for Reversed<'_, C> {
    fn n(&self) -> usize {
        self.0.n()
    }
    fn domain(&self) -> (f64, f64) {
        self.0.domain()
    }
    fn frame(&self, t: f64) -> Result<DMatrix<f64>> {
        let (a, b) = self.0.domain();
        self.0.frame(a + b - t)
    }
}

/// A crossing of a Lagrangian curve with the reference subspace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingReport {
    pub t: f64,
    pub multiplicity: usize,
    pub signature: i64,
    pub bracket: [f64; 2],
}

/// `σ(z, ż)` as a matrix in frame coordinates: `FᵀΩḞ`, symmetrized, with
/// `Ḟ` from a 5-point stencil of step `h`.
pub fn velocity_form(curve: &dyn LagrangianPath, t: f64, h: f64) -> Result<DMatrix<f64>> {
    let n = curve.n();
    let f = curve.frame(t)?;
    let fm2 = curve.frame(t - 2.0 * h)?;
    let fm1 = curve.frame(t - h)?;
    let fp1 = curve.frame(t + h)?;
    let fp2 = curve.frame(t + 2.0 * h)?;
    let fdot = (fm2 - fp2 + (fp1 - fm1) * 8.0) / (12.0 * h);
    let q = f.transpose() * symplectic_form(n) * fdot;
    Ok((&q + q.transpose()) * 0.5)
}

/// Pairing `P = FᵀΩG₀`; `F c ∈ L₀` iff `Pᵀc = 0`.
fn pairing_matrix(f: &DMatrix<f64>, g0: &DMatrix<f64>) -> DMatrix<f64> {
    f.transpose() * symplectic_form(f.ncols()) * g0
}

/// The crossing form at `t` on `Λ(t) ∩ L₀`, in an orthonormal basis of
/// the intersection coordinates. `scale` sets the stencil step.
pub fn crossing_form(
    curve: &dyn LagrangianPath,
    t: f64,
    l0: &LagrangianFrame,
    scale: f64,
) -> Result<DMatrix<f64>> {
    let f = curve.frame(t)?;
    let p = pairing_matrix(&f, &l0.orthonormal());
    let svd = sorted_svd(&p.transpose());
    let k = decide_rank(svd.singular_values.clone(), RANK_REL_TOL, RANK_GAP)?.nullity(p.nrows());
    if k == 0 {
        return Err(Error::NoIntersection(t));
    }
    let n = p.nrows();
    let c = svd.v.columns(n - k, k).into_owned();
    let q = velocity_form(curve, t, FD_STEP * scale)?;
    let form = c.transpose() * q * &c;
    Ok((&form + form.transpose()) * 0.5)
}

/// `(positive, negative)` eigenvalue counts, or an error when an eigenvalue
/// is numerically zero relative to `scale`.
fn inertia(form: &DMatrix<f64>, scale: f64, t: f64) -> Result<(usize, usize)> {
    let eig = form.clone().symmetric_eigen();
    let mut pos = 0;
    let mut neg = 0;
    for &l in eig.eigenvalues.iter() {
        if l.abs() <= 1e-6 * scale {
            return Err(Error::DegenerateCrossing(t));
        }
        if l > 0.0 {
            pos += 1;
        } else {
            neg += 1;
        }
    }
    Ok((pos, neg))
}

/// Equally spaced sweep times over `[r, s]`, both ends included.
pub fn sweep_grid(r: f64, s: f64) -> Vec<f64> {
    (0..=SWEEP_CELLS)
        .map(|i| {
            if i == SWEEP_CELLS {
                s
            } else {
                r + (s - r) * i as f64 / SWEEP_CELLS as f64
            }
        })
        .collect()
}

struct Probe {
    det: f64,
    sigma_min: f64,
    deficient: bool,
}

fn probe(curve: &dyn LagrangianPath, g0: &DMatrix<f64>, t: f64) -> Result<Probe> {
    let f = polar(&curve.frame(t)?);
    let p = pairing_matrix(&f, g0);
    let sv = sorted_svd(&p).singular_values;
    let sigma_max = sv[0];
    let sigma_min = *sv.last().expect("n >= 1");
    Ok(Probe {
        det: p.determinant(),
        sigma_min,
        deficient: sigma_min <= RANK_REL_TOL * sigma_max.max(f64::MIN_POSITIVE),
    })
}

fn bisect_det(
    curve: &dyn LagrangianPath,
    g0: &DMatrix<f64>,
    mut lo: f64,
    mut hi: f64,
    mut det_lo: f64,
) -> Result<f64> {
    while hi - lo > ROOT_TOL * lo.abs().max(hi.abs()).max(1.0) {
        let mid = 0.5 * (lo + hi);
        let d = probe(curve, g0, mid)?.det;
        if d == 0.0 {
            return Ok(mid);
        }
        if (d > 0.0) == (det_lo > 0.0) {
            lo = mid;
            det_lo = d;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn golden_min(
    curve: &dyn LagrangianPath,
    g0: &DMatrix<f64>,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = probe(curve, g0, a)?.sigma_min;
    let mut fb = probe(curve, g0, b)?.sigma_min;
    while hi - lo > ROOT_TOL * lo.abs().max(hi.abs()).max(1.0) {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = probe(curve, g0, a)?.sigma_min;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = probe(curve, g0, b)?.sigma_min;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Every crossing of `curve` with `l0` in the open interval `(r, s)`.
///
/// Odd-multiplicity crossings are bracketed by sign changes of
/// `det(F̂ᵀΩĜ₀)` on a uniform grid and refined by bisection; even ones are
/// found as grid minima of the smallest singular value of the same pairing.
pub fn find_crossings(
    curve: &dyn LagrangianPath,
    l0: &LagrangianFrame,
    r: f64,
    s: f64,
) -> Result<Vec<CrossingReport>> {
    if l0.n() != curve.n() {
        return Err(Error::DimensionMismatch {
            what: "reference Lagrangian",
            expected: curve.n(),
            got: l0.n(),
        });
    }
    let (a, b) = curve.domain();
    if !(r < s && r >= a && s <= b) {
        return Err(Error::InvalidArgument(format!(
            "interval [{r}, {s}] is not inside the curve domain [{a}, {b}]"
        )));
    }
    let g0 = l0.orthonormal();
    let grid = sweep_grid(r, s);
    let probes = grid
        .iter()
        .map(|&t| probe(curve, &g0, t))
        .collect::<Result<Vec<_>>>()?;

    // an indicator vanishing on a whole stretch means a non-isolated crossing
    let mut run = 0;
    for (i, p) in probes.iter().enumerate() {
        run = if p.deficient { run + 1 } else { 0 };
        if run >= 3 {
            let mut hi = i;
            while hi + 1 < probes.len() && probes[hi + 1].deficient {
                hi += 1;
            }
            return Err(Error::NonIdealStructure {
                lo: grid[i + 1 - run],
                hi: grid[hi],
            });
        }
    }
    if probes[0].deficient {
        return Err(Error::EndpointCrossing(r));
    }
    if probes[SWEEP_CELLS].deficient {
        return Err(Error::EndpointCrossing(s));
    }

    let mut roots: Vec<(f64, [f64; 2])> = Vec::new();
    let mut sign_change = vec![false; SWEEP_CELLS];
    for i in 0..SWEEP_CELLS {
        let (d0, d1) = (probes[i].det, probes[i + 1].det);
        if d1 == 0.0 {
            continue; // counted from the next cell
        }
        if d0 == 0.0 || (d0 > 0.0) != (d1 > 0.0) {
            sign_change[i] = true;
            let (lo, hi) = (grid[i], grid[i + 1]);
            let t = if d0 == 0.0 {
                lo
            } else {
                bisect_det(curve, &g0, lo, hi, d0)?
            };
            roots.push((t, [lo, hi]));
        }
    }
    for i in 1..SWEEP_CELLS {
        let sm = probes[i].sigma_min;
        let local_min = sm <= probes[i - 1].sigma_min && sm <= probes[i + 1].sigma_min;
        if !local_min || sm > TOUCH_CANDIDATE || sign_change[i - 1] || sign_change[i] {
            continue;
        }
        let t = golden_min(curve, &g0, grid[i - 1], grid[i + 1])?;
        if probe(curve, &g0, t)?.deficient {
            roots.push((t, [grid[i - 1], grid[i + 1]]));
        }
    }
    roots.sort_by(|x, y| x.0.total_cmp(&y.0));
    for w in roots.windows(2) {
        if w[1].0 - w[0].0 < CLUSTER_TOL {
            return Err(Error::CrossingCluster(w[0].0));
        }
    }

    let n = curve.n();
    roots
        .into_iter()
        .map(|(t, bracket)| {
            let width = bracket[1] - bracket[0];
            let form = crossing_form(curve, t, l0, width)?;
            let full = velocity_form(curve, t, FD_STEP * width)?;
            let scale = full.norm().max(f64::MIN_POSITIVE);
            let (pos, neg) = inertia(&form, scale, t)?;
            debug_assert!(pos + neg <= n);
            Ok(CrossingReport {
                t,
                multiplicity: pos + neg,
                signature: pos as i64 - neg as i64,
                bracket,
            })
        })
        .collect()
}

/// Sum of crossing-form signatures over `(r, s)`; the endpoints must not be
/// crossings.
pub fn maslov_index(
    curve: &dyn LagrangianPath,
    l0: &LagrangianFrame,
    r: f64,
    s: f64,
) -> Result<i64> {
    Ok(find_crossings(curve, l0, r, s)?
        .iter()
        .map(|c| c.signature)
        .sum())
}

/// The Jacobi curve of `(p, λ₀)` integrated far enough to evaluate crossing
/// forms up to `s_end`, with the sweep grid of `[r, s_end]` stored exactly.
pub fn ray_curve(
    s: &Structure,
    point: &[f64],
    covector: &[f64],
    r: f64,
    s_end: f64,
    tol: f64,
) -> Result<JacobiCurve> {
    let mut outputs = sweep_grid(r, s_end);
    let cell = (s_end - r) / SWEEP_CELLS as f64;
    outputs.push(s_end + cell);
    let traj = integrate_extremal_at(s, point, covector, &outputs, tol)?;
    Ok(JacobiCurve::new(traj, CurveKind::Jacobi))
}

/// Conjugate times of `(p, λ₀)` in `(r, s_end)` with multiplicities.
///
/// Fails when `r` or `s_end` is itself conjugate, and when any crossing
/// form is not negative definite.
pub fn count_conjugate_on_ray(
    s: &Structure,
    point: &[f64],
    covector: &[f64],
    r: f64,
    s_end: f64,
    tol: f64,
) -> Result<Vec<CrossingReport>> {
    s.check_len("point", point.len())?;
    s.check_len("covector", covector.len())?;
    let st = crate::structure::PhaseState::from_slices(point, covector)?;
    if s.hamiltonian(&st)? == 0.0 {
        return Err(Error::ZeroHamiltonian);
    }
    if r == 0.0 {
        return Err(Error::EndpointCrossing(0.0));
    }
    if !(r > 0.0 && s_end > r && s_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ray window [{r}, {s_end}] must satisfy 0 < r < s"
        )));
    }
    let curve = ray_curve(s, point, covector, r, s_end, tol)?;
    let reports = find_crossings(&curve, &LagrangianFrame::vertical(s.dim()), r, s_end)?;
    let index: i64 = reports.iter().map(|c| c.signature).sum();
    let multiplicity: usize = reports.iter().map(|c| c.multiplicity).sum();
    if -index != multiplicity as i64 {
        return Err(Error::Monotonicity {
            index,
            multiplicity,
        });
    }
    Ok(reports)
}

/// Counts along one perturbed ray of a continuity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayCount {
    pub covector: Vec<f64>,
    pub total_multiplicity: usize,
    pub maslov_index: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    /// `dim Ker d_{λ₀} exp_p`.
    pub kernel_dim: usize,
    /// Ray-parameter window `[1 − δ_w, 1 + δ_w]`.
    pub window: [f64; 2],
    pub delta_ray: f64,
    pub rays: Vec<RayCount>,
}

impl ContinuityReport {
    pub fn passed(&self) -> bool {
        self.rays.iter().all(|r| {
            r.total_multiplicity == self.kernel_dim
                && r.maslov_index == -(self.kernel_dim as i64)
        })
    }
}

const WINDOW_CANDIDATES: [f64; 5] = [0.1, 0.05, 0.02, 0.01, 0.005];

/// Checks that every ray through a `δ_ray`-neighbourhood of `λ₀` carries,
/// inside a window around `t = 1`, total conjugate multiplicity equal to
/// `dim Ker d_{λ₀} exp_p`.
///
/// The window half-width is the largest candidate for which the central ray
/// has crossing-free endpoints and no crossing other than the one at `t = 1`.
pub fn continuity_check(
    s: &Structure,
    point: &[f64],
    covector: &[f64],
    delta_ray: f64,
    n_rays: usize,
    seed: u64,
    tol: f64,
) -> Result<ContinuityReport> {
    if !(delta_ray > 0.0 && delta_ray < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta_ray must lie in (0, 1), got {delta_ray}"
        )));
    }
    let st = crate::structure::PhaseState::from_slices(point, covector)?;
    if s.hamiltonian(&st)? == 0.0 {
        return Err(Error::ZeroHamiltonian);
    }
    let d = crate::flow::d_exp(s, point, covector, tol)?;
    let kernel_dim = linalg::numerical_rank(&d)?.nullity(s.dim());

    let mut window = None;
    for &w in &WINDOW_CANDIDATES {
        match count_conjugate_on_ray(s, point, covector, 1.0 - w, 1.0 + w, tol) {
            Ok(reports) => {
                let total: usize = reports.iter().map(|c| c.multiplicity).sum();
                let central = reports.iter().all(|c| (c.t - 1.0).abs() < w / 2.0);
                if total == kernel_dim && central {
                    window = Some(w);
                    break;
                }
            }
            Err(Error::EndpointCrossing(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let w = window.ok_or_else(|| {
        Error::Certification("no crossing-free window found around t = 1".into())
    })?;

    let n = s.dim();
    let base = DVector::from_column_slice(covector);
    let radius = delta_ray * base.norm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rays = Vec::with_capacity(n_rays);
    for _ in 0..n_rays {
        let dir = loop {
            let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            if v.norm() > 1e-3 {
                break v.normalize();
            }
        };
        let rho = radius * rng.gen_range(0.0..1.0f64).max(1e-3);
        let cov = &base + dir * rho;
        let reports = count_conjugate_on_ray(s, point, cov.as_slice(), 1.0 - w, 1.0 + w, tol)
            .map_err(|e| match e {
                Error::EndpointCrossing(t) => Error::Certification(format!(
                    "perturbed ray {:?} is conjugate at the window endpoint t = {t}",
                    cov.as_slice()
                )),
                other => other,
            })?;
        rays.push(RayCount {
            covector: cov.as_slice().to_vec(),
            total_multiplicity: reports.iter().map(|c| c.multiplicity).sum(),
            maslov_index: reports.iter().map(|c| c.signature).sum(),
        });
    }
    Ok(ContinuityReport {
        kernel_dim,
        window: [1.0 - w, 1.0 + w],
        delta_ray,
        rays,
    })
}
