//! Normal extremals `λ̇ = H⃗(λ)` and their variational flow, integrated as one
//! augmented system so that `Φ(t)` is always paired with `λ(t)`.
//!
//! `Φ(t)` acts on `(δp, δq)`; its `q`-rows by `p`-columns block is the
//! differential of the time-`t` endpoint with respect to the initial covector.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::integrator::{self, StepControl};
use crate::linalg::symplectic_defect;
use crate::structure::{PhaseState, Structure};

pub const DEFAULT_TOL: f64 = 1e-10;

/// A sampled normal extremal together with its fundamental matrices.
#[derive(Debug, Clone)]
pub struct ExtremalTrajectory {
    structure: Arc<Structure>,
    point: DVector<f64>,
    covector: DVector<f64>,
    times: Vec<f64>,
    states: Vec<PhaseState>,
    phis: Vec<DMatrix<f64>>,
    tol: f64,
}

/// A ray `t ↦ tλ₀` of covectors at `p`, for `t ∈ [a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub point: DVector<f64>,
    pub direction: DVector<f64>,
    pub a: f64,
    pub b: f64,
}

impl Ray {
    pub fn new(point: DVector<f64>, direction: DVector<f64>, a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b > a && b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ray interval [{a}, {b}] must satisfy 0 <= a < b"
            )));
        }
        Ok(Self {
            point,
            direction,
            a,
            b,
        })
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        &self.direction * t
    }
}

/// Right-hand side of the augmented system. The layout is
/// `[q (n), p (n), Φ (4n², column-major, (δp, δq) order)]`.
pub(crate) fn augmented_rhs(s: &Structure, y: &[f64], dy: &mut [f64]) {
    let n = s.dim();
    let (q, rest) = y.split_at(n);
    let (p, phi) = rest.split_at(n);
    let jet = s.jet(q, p);
    let g = &jet.gradient;
    for i in 0..n {
        dy[i] = g[n + i];
        dy[n + i] = -g[i];
    }
    let gen = generator_from_hessian(&jet.hessian, n);
    let m = 2 * n;
    let phi = nalgebra::DMatrixView::from_slice(phi, m, m);
    let mut out = nalgebra::DMatrixViewMut::from_slice(&mut dy[2 * n..], m, m);
    out.gemm(1.0, &gen, &phi, 0.0);
}

/// Linearized Hamiltonian vector field in `(δp, δq)` order,
/// `[[-H_qp, -H_qq], [H_pp, H_pq]]`, from the `(q, p)`-ordered Hessian.
pub(crate) fn generator_from_hessian(hess: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut gen = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            gen[(i, j)] = -hess[(i, n + j)];
            gen[(i, n + j)] = -hess[(i, j)];
            gen[(n + i, j)] = hess[(n + i, n + j)];
            gen[(n + i, n + j)] = hess[(n + i, j)];
        }
    }
    gen
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

fn unpack(n: usize, y: &[f64]) -> (PhaseState, DMatrix<f64>) {
    let st = PhaseState {
        q: DVector::from_column_slice(&y[..n]),
        p: DVector::from_column_slice(&y[n..2 * n]),
    };
    let phi = DMatrix::from_column_slice(2 * n, 2 * n, &y[2 * n..]);
    (st, phi)
}

fn pack(st: &PhaseState, phi: &DMatrix<f64>) -> Vec<f64> {
    let mut y = Vec::with_capacity(st.q.len() * 2 + phi.len());
    y.extend_from_slice(st.q.as_slice());
    y.extend_from_slice(st.p.as_slice());
    y.extend_from_slice(phi.as_slice());
    y
}

/// One classical Runge–Kutta step, for gaps too short for adaptive control.
fn rk4_step(s: &Structure, y: &[f64], h: f64) -> Vec<f64> {
    let m = y.len();
    let mut k = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    let mut stage = y.to_vec();
    augmented_rhs(s, y, &mut k[0]);
    for (i, c) in [0.5, 0.5, 1.0].into_iter().enumerate() {
        for j in 0..m {
            stage[j] = y[j] + c * h * k[i][j];
        }
        let (_, rest) = k.split_at_mut(i + 1);
        augmented_rhs(s, &stage, &mut rest[0]);
    }
    (0..m)
        .map(|j| y[j] + h / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]))
        .collect()
}

/// Integrate the extremal from `(point, covector)` on `[0, t_end]`.
pub fn integrate_extremal(
    s: &Structure,
    point: &[f64],
    covector: &[f64],
    t_end: f64,
    tol: f64,
) -> Result<ExtremalTrajectory> {
    integrate_extremal_at(s, point, covector, &[t_end], tol)
}

/// As [`integrate_extremal`], additionally landing exactly on every time in
/// `outputs` (increasing, positive). The last output is the final time.
pub fn integrate_extremal_at(
    s: &Structure,
    point: &[f64],
    covector: &[f64],
    outputs: &[f64],
    tol: f64,
) -> Result<ExtremalTrajectory> {
    s.check_len("point", point.len())?;
    s.check_len("covector", covector.len())?;
    check_tol(tol)?;
    let Some(&t_end) = outputs.last() else {
        return Err(Error::InvalidArgument("no output times".into()));
    };
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time must be positive, got {t_end}")));
    }
    let start = PhaseState::from_slices(point, covector)?;
    let n = s.dim();
    let identity = DMatrix::identity(2 * n, 2 * n);

    let mut times = vec![0.0];
    let mut states = vec![start.clone()];
    let mut phis = vec![identity.clone()];
    integrator::integrate(
        |_, y, dy| augmented_rhs(s, y, dy),
        0.0,
        &pack(&start, &identity),
        outputs,
        StepControl::from_tol(tol),
        |t, y, _| {
            let (st, phi) = unpack(n, y);
            times.push(t);
            states.push(st);
            phis.push(phi);
        },
    )?;

    Ok(ExtremalTrajectory {
        structure: Arc::new(s.clone()),
        point: DVector::from_column_slice(point),
        covector: DVector::from_column_slice(covector),
        times,
        states,
        phis,
        tol,
    })
}

/// `π(e^{H⃗}(p, λ₀))`.
pub fn exp_map(s: &Structure, point: &[f64], covector: &[f64], tol: f64) -> Result<DVector<f64>> {
    let traj = integrate_extremal(s, point, covector, 1.0, tol)?;
    Ok(traj.final_state().q.clone())
}

/// Matrix of `d_{λ₀} exp_p`, mapping `δλ₀` to `δq(1)`.
pub fn d_exp(s: &Structure, point: &[f64], covector: &[f64], tol: f64) -> Result<DMatrix<f64>> {
    let traj = integrate_extremal(s, point, covector, 1.0, tol)?;
    Ok(traj.d_exp_block(traj.phis.len() - 1))
}

impl ExtremalTrajectory {
    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn dim(&self) -> usize {
        self.structure.dim()
    }

    pub fn point(&self) -> &DVector<f64> {
        &self.point
    }

    pub fn covector(&self) -> &DVector<f64> {
        &self.covector
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[PhaseState] {
        &self.states
    }

    pub fn phis(&self) -> &[DMatrix<f64>] {
        &self.phis
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has samples")
    }

    pub fn final_state(&self) -> &PhaseState {
        self.states.last().expect("trajectory has samples")
    }

    pub fn final_phi(&self) -> &DMatrix<f64> {
        self.phis.last().expect("trajectory has samples")
    }

    /// `H` at the initial state.
    pub fn energy(&self) -> f64 {
        let st = &self.states[0];
        0.5 * self
            .structure
            .momenta(st.q.as_slice(), st.p.as_slice())
            .norm_squared()
    }

    fn d_exp_block(&self, idx: usize) -> DMatrix<f64> {
        let n = self.dim();
        self.phis[idx].view((n, 0), (n, n)).into_owned()
    }

    /// State and fundamental matrix at an arbitrary `t ∈ [0, T]`.
    ///
    /// Stored samples are returned as is; other times are reached by
    /// integrating forward from the nearest earlier sample.
    pub fn sample_at(&self, t: f64) -> Result<(PhaseState, DMatrix<f64>)> {
        let t_end = self.t_end();
        if !(0.0..=t_end).contains(&t) {
            return Err(Error::TimeOutOfRange { t, t_end });
        }
        let idx = self.times.partition_point(|&s| s <= t) - 1;
        if self.times[idx] == t {
            return Ok((self.states[idx].clone(), self.phis[idx].clone()));
        }
        let n = self.dim();
        let h = t - self.times[idx];
        if h <= 1e-12 * t.abs().max(1.0) {
            let y = rk4_step(&self.structure, &pack(&self.states[idx], &self.phis[idx]), h);
            return Ok(unpack(n, &y));
        }
        let mut last = Vec::new();
        integrator::integrate(
            |_, y, dy| augmented_rhs(&self.structure, y, dy),
            self.times[idx],
            &pack(&self.states[idx], &self.phis[idx]),
            &[t],
            StepControl::from_tol(self.tol),
            |_, y, _| last = y.to_vec(),
        )?;
        Ok(unpack(n, &last))
    }

    /// `Φ_{qp}(t)`: the differential of `λ₀ ↦ q(t)`.
    pub fn endpoint_differential(&self, t: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let (_, phi) = self.sample_at(t)?;
        Ok(phi.view((n, 0), (n, n)).into_owned())
    }

    /// `d_{tλ₀} exp_p = Φ_{qp}(t) / t` for `t > 0`, by homogeneity of the flow.
    pub fn ray_differential(&self, t: f64) -> Result<DMatrix<f64>> {
        if t <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "ray differential needs t > 0, got {t}"
            )));
        }
        Ok(self.endpoint_differential(t)? / t)
    }

    /// Largest `‖ΦᵀΩΦ − Ω‖_∞` over the stored samples.
    pub fn max_symplectic_defect(&self) -> f64 {
        self.phis
            .iter()
            .map(symplectic_defect)
            .fold(0.0, f64::max)
    }
}

/// Energy and speed diagnostics along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedReport {
    pub energy: f64,
    /// `max |H(t) − H(0)| / H(0)`, or the absolute drift when `H(0) = 0`.
    pub max_energy_drift: f64,
    /// `max |‖γ̇‖² − 2H(0)|` with `‖γ̇‖² = Σ h_k²`.
    pub max_speed_defect: f64,
}

pub fn check_constant_speed(traj: &ExtremalTrajectory) -> SpeedReport {
    let h0 = traj.energy();
    let mut drift: f64 = 0.0;
    let mut speed: f64 = 0.0;
    for st in &traj.states {
        let sq = traj
            .structure
            .momenta(st.q.as_slice(), st.p.as_slice())
            .norm_squared();
        let d = (0.5 * sq - h0).abs();
        drift = drift.max(if h0 > 0.0 { d / h0 } else { d });
        speed = speed.max((sq - 2.0 * h0).abs());
    }
    SpeedReport {
        energy: h0,
        max_energy_drift: drift,
        max_speed_defect: speed,
    }
}

/// Outcome of the ray-velocity check at every positive sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct RayVelocityReport {
    /// `√(2H(λ₀))`.
    pub expected: f64,
    /// Smallest sub-Riemannian norm of `d_{tλ₀}exp_p(λ₀)` seen.
    pub min_norm: f64,
    /// Largest distance of that image from the distribution.
    pub max_residual: f64,
    pub samples: usize,
}

impl RayVelocityReport {
    pub fn margin(&self) -> f64 {
        self.min_norm - (self.expected - 1e-6)
    }

    pub fn passed(&self) -> bool {
        self.expected > 0.0 && self.margin() >= 0.0
    }
}

/// Measures `‖d_{tλ₀}exp_p(λ₀)‖` along the trajectory. Rejects covectors
/// with `H = 0`.
pub fn check_ray_velocity(traj: &ExtremalTrajectory) -> Result<RayVelocityReport> {
    let h0 = traj.energy();
    if h0 == 0.0 {
        return Err(Error::ZeroHamiltonian);
    }
    let n = traj.dim();
    let mut min_norm = f64::INFINITY;
    let mut max_residual: f64 = 0.0;
    let mut samples = 0;
    for ((t, st), phi) in traj.times.iter().zip(&traj.states).zip(&traj.phis) {
        if *t <= 0.0 {
            continue;
        }
        let v = phi.view((n, 0), (n, n)) * &traj.covector / *t;
        let hn = traj.structure.horizontal_norm(st.q.as_slice(), &v)?;
        min_norm = min_norm.min(hn.norm);
        max_residual = max_residual.max(hn.residual);
        samples += 1;
    }
    Ok(RayVelocityReport {
        expected: (2.0 * h0).sqrt(),
        min_norm,
        max_residual,
        samples,
    })
}
