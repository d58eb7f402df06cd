//! Invariant batteries: constant speed (`r1`), regularity (`r2`), continuity
//! (`r3`) and the Heisenberg closed-form oracle.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{check_constant_speed, check_ray_velocity, integrate_extremal, integrate_extremal_at};
use crate::heisenberg::{
    grid_values, heis_conjugate_roots, heis_exp_closed, heis_jacobi_matrix, locus_scan,
    HeisCovector, RootBranch,
};
use crate::jacobi::{pairing_drift, propagate_jacobi, regularity_check};
use crate::linalg::symplectic_defect;
use crate::maslov::continuity_check;
use crate::structure::Structure;

pub const ENERGY_DRIFT_TOL: f64 = 1e-9;
pub const SYMPLECTIC_TOL: f64 = 1e-7;
pub const PAIRING_TOL: f64 = 1e-9;
pub const ORACLE_STATE_TOL: f64 = 1e-8;
pub const ORACLE_PHI_TOL: f64 = 1e-7;
pub const ORACLE_SYMPLECTIC_TOL: f64 = 1e-10;
pub const CONTINUITY_DELTA: f64 = 1e-2;
pub const CONTINUITY_RAYS: usize = 50;
pub const LOCUS_GRID: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    R1,
    R2,
    R3,
    Oracle,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 5] = ["r1", "r2", "r3", "oracle", "all"];
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r1" => Ok(Suite::R1),
            "r2" => Ok(Suite::R2),
            "r3" => Ok(Suite::R3),
            "oracle" => Ok(Suite::Oracle),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite {other:?}, expected one of {}",
                Suite::NAMES.join(", ")
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = *self as usize;
        f.write_str(Suite::NAMES[i])
    }
}

/// One measured quantity against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `value ≤ threshold` when true, `value ≥ threshold` otherwise.
    pub upper_bound: bool,
    pub passed: bool,
    pub seconds: f64,
}

impl Check {
    fn at_most(suite: Suite, name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            value,
            threshold,
            upper_bound: true,
            passed: value <= threshold,
            seconds: 0.0,
        }
    }

    fn at_least(suite: Suite, name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            value,
            threshold,
            upper_bound: false,
            passed: value >= threshold,
            seconds: 0.0,
        }
    }

    fn exact(suite: Suite, name: impl Into<String>, ok: bool) -> Self {
        Self::at_least(suite, name, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    fn failed(suite: Suite, name: impl Into<String>, err: &Error) -> Self {
        let mut c = Self::exact(suite, format!("{} ({err})", name.into()), false);
        c.value = f64::NAN;
        c
    }

    /// Distance to the threshold, positive when passing.
    pub fn margin(&self) -> f64 {
        if self.upper_bound {
            self.threshold - self.value
        } else {
            self.value - self.threshold
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = if self.upper_bound { "<=" } else { ">=" };
        write!(
            f,
            "{} {:<6} {}: {:.3e} {rel} {:.3e} (margin {:.3e}, {:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite.to_string(),
            self.name,
            self.value,
            self.threshold,
            self.margin(),
            self.seconds
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// The two conjugate covectors `(1, 0, 2π)` and `(1, 0, α*)` used by the
/// regularity and continuity batteries.
pub fn reference_conjugate_covectors() -> [[f64; 3]; 2] {
    let alpha_star = heis_conjugate_roots(10.0)
        .into_iter()
        .find(|r| r.branch == RootBranch::SinNonzero)
        .expect("a fold root below 10")
        .alpha;
    [[1.0, 0.0, TAU], [1.0, 0.0, alpha_star]]
}

fn random_in_ball(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let r2: f64 = v.iter().map(|x| x * x).sum();
        if r2 <= 1.0 && r2 > 1e-4 {
            return v.map(|x| x * radius);
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng) -> [f64; 3] {
    std::array::from_fn(|_| rng.gen_range(-1.0..1.0))
}

fn timed(suite: Suite, name: &str, f: impl FnOnce() -> Result<Vec<Check>>) -> Vec<Check> {
    let start = Instant::now();
    let mut checks = f().unwrap_or_else(|e| vec![Check::failed(suite, name, &e)]);
    let secs = start.elapsed().as_secs_f64();
    for c in &mut checks {
        c.seconds = secs;
    }
    checks
}

/// Energy conservation, symplecticity and ray velocity on random
/// Heisenberg extremals and a Euclidean control case.
pub fn r1_checks(seed: u64, tol: f64) -> Vec<Check> {
    timed(Suite::R1, "constant speed", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heis = Structure::heisenberg();
        let mut cases: Vec<(Structure, Vec<f64>, Vec<f64>)> = (0..20)
            .map(|_| {
                (
                    heis.clone(),
                    random_point(&mut rng).to_vec(),
                    random_in_ball(&mut rng, 3.0).to_vec(),
                )
            })
            .collect();
        for c in reference_conjugate_covectors() {
            cases.push((heis.clone(), vec![0.0; 3], c.to_vec()));
        }
        cases.push((Structure::euclidean(3)?, vec![0.5, -1.0, 2.0], vec![1.0, -2.0, 0.5]));

        let mut drift: f64 = 0.0;
        let mut symp: f64 = 0.0;
        let mut margin = f64::INFINITY;
        for (s, p, l) in &cases {
            let traj = integrate_extremal(s, p, l, 1.0, tol)?;
            drift = drift.max(check_constant_speed(&traj).max_energy_drift);
            symp = symp.max(traj.max_symplectic_defect());
            margin = margin.min(check_ray_velocity(&traj)?.margin());
        }
        Ok(vec![
            Check::at_most(Suite::R1, "energy drift", drift, ENERGY_DRIFT_TOL),
            Check::at_most(Suite::R1, "symplectic defect", symp, SYMPLECTIC_TOL),
            Check::at_least(Suite::R1, "ray velocity margin", margin, 0.0),
        ])
    })
}

/// Kernel dimension, the regularity isomorphism and pairing constancy at the
/// two reference conjugate covectors.
pub fn r2_checks(tol: f64) -> Vec<Check> {
    timed(Suite::R2, "regularity", || {
        let s = Structure::heisenberg();
        let mut checks = Vec::new();
        for cov in reference_conjugate_covectors() {
            let label = format!("alpha0 = {:.9}", cov[2]);
            let outputs: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
            let traj = integrate_extremal_at(&s, &[0.0; 3], &cov, &outputs, tol)?;
            let reg = regularity_check(&traj)?;
            checks.push(Check::exact(
                Suite::R2,
                format!("kernel dimension 1 at {label}"),
                reg.kernel_dim == 1,
            ));
            checks.push(Check::exact(
                Suite::R2,
                format!("regularity isomorphism at {label}"),
                reg.passed(),
            ));
            let basis: Vec<_> = (0..6)
                .map(|i| {
                    let e = DVector::from_fn(6, |j, _| if i == j { 1.0 } else { 0.0 });
                    propagate_jacobi(&traj, &e.rows(0, 3).into_owned(), &e.rows(3, 3).into_owned())
                })
                .collect::<Result<_>>()?;
            let mut drift: f64 = 0.0;
            for i in 0..6 {
                for j in i + 1..6 {
                    drift = drift.max(pairing_drift(&basis[i], &basis[j])?);
                }
            }
            checks.push(Check::at_most(
                Suite::R2,
                format!("pairing drift at {label}"),
                drift,
                PAIRING_TOL,
            ));
        }
        Ok(checks)
    })
}

/// Every ray through a small neighbourhood of each reference conjugate
/// covector carries exactly one conjugate time, with index `−1`.
pub fn r3_checks(seed: u64, tol: f64) -> Vec<Check> {
    timed(Suite::R3, "continuity", || {
        let s = Structure::heisenberg();
        let mut checks = Vec::new();
        for cov in reference_conjugate_covectors() {
            let label = format!("alpha0 = {:.9}", cov[2]);
            let rep = continuity_check(&s, &[0.0; 3], &cov, CONTINUITY_DELTA, CONTINUITY_RAYS, seed, tol)?;
            let worst = rep
                .rays
                .iter()
                .map(|r| (r.total_multiplicity as f64 - 1.0).abs())
                .fold(0.0, f64::max);
            checks.push(Check::exact(
                Suite::R3,
                format!("kernel dimension 1 at {label}"),
                rep.kernel_dim == 1,
            ));
            checks.push(Check::at_most(
                Suite::R3,
                format!("multiplicity error over {} rays at {label}", rep.rays.len()),
                worst,
                0.0,
            ));
            checks.push(Check::exact(
                Suite::R3,
                format!("index equals minus multiplicity at {label}"),
                rep.rays
                    .iter()
                    .all(|r| r.maslov_index == -(r.total_multiplicity as i64)),
            ));
        }
        Ok(checks)
    })
}

/// Sup-norm distance between numeric and closed-form Heisenberg extremals
/// over `n` random covectors with `‖λ₀‖ ≤ 10`.
pub fn oracle_extremal_error(seed: u64, n: usize, tol: f64) -> Result<f64> {
    let s = Structure::heisenberg();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outputs: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let hc = HeisCovector::new(random_point(&mut rng), random_in_ball(&mut rng, 10.0));
        let traj = integrate_extremal_at(&s, &hc.point, &hc.covector, &outputs, tol)?;
        for (t, st) in traj.times().iter().zip(traj.states()) {
            let exact = heis_exp_closed(&hc, *t).phase_state();
            let d = (&st.q - &exact.q).amax().max((&st.p - &exact.p).amax());
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Entrywise distance between numeric `Φ(t)` and the closed-form matrix at
/// `n` random `(λ₀, t)`, and the worst symplectic defect of the closed form.
pub fn oracle_fundamental_error(seed: u64, n: usize, tol: f64) -> Result<(f64, f64)> {
    let s = Structure::heisenberg();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut symp: f64 = 0.0;
    for _ in 0..n {
        let hc = HeisCovector::new(random_point(&mut rng), random_in_ball(&mut rng, 10.0));
        let t = rng.gen_range(0.05..1.0);
        let traj = integrate_extremal(&s, &hc.point, &hc.covector, t, tol)?;
        let m = heis_jacobi_matrix(&hc, t);
        worst = worst.max((traj.final_phi() - &m).amax());
        symp = symp.max(symplectic_defect(&m));
    }
    Ok((worst, symp))
}

/// Disagreements between `φ`-classification and SVD rank on the
/// `LOCUS_GRID²` grid over `u₀ ∈ [0.2, 2]`, `α₀ ∈ (0, 10]`.
pub fn oracle_locus_disagreements(tol: f64) -> Result<usize> {
    let u = grid_values(0.2, 2.0, LOCUS_GRID, false);
    let a = grid_values(0.0, 10.0, LOCUS_GRID, true);
    Ok(locus_scan(&u, &a, 0.0, tol)?.iter().filter(|r| !r.agrees()).count())
}

pub fn oracle_checks(seed: u64, tol: f64) -> Vec<Check> {
    let mut checks = timed(Suite::Oracle, "closed-form extremals", || {
        Ok(vec![Check::at_most(
            Suite::Oracle,
            "extremal sup error over 100 covectors",
            oracle_extremal_error(seed, 100, tol)?,
            ORACLE_STATE_TOL,
        )])
    });
    checks.extend(timed(Suite::Oracle, "closed-form fundamental matrix", || {
        let (err, symp) = oracle_fundamental_error(seed, 20, tol)?;
        Ok(vec![
            Check::at_most(Suite::Oracle, "fundamental matrix error at 20 samples", err, ORACLE_PHI_TOL),
            Check::at_most(Suite::Oracle, "closed-form symplectic defect", symp, ORACLE_SYMPLECTIC_TOL),
        ])
    }));
    checks.extend(timed(Suite::Oracle, "conjugate locus", || {
        let roots: Vec<f64> = heis_conjugate_roots(10.0).iter().map(|r| r.alpha).collect();
        let [c1, c0] = reference_conjugate_covectors();
        let expected = roots.len() == 2
            && (roots[0] - c1[2]).abs() < 1e-12
            && (roots[1] - 8.986818916).abs() < 1e-9
            && (roots[1] - c0[2]).abs() == 0.0;
        Ok(vec![
            Check::at_most(
                Suite::Oracle,
                "locus disagreements on the 40x40 grid",
                oracle_locus_disagreements(tol)? as f64,
                0.0,
            ),
            Check::exact(Suite::Oracle, "roots below 10 are 2pi and alpha*", expected),
        ])
    }));
    checks
}

pub fn run_suite(suite: Suite, seed: u64, tol: f64) -> SuiteReport {
    let start = Instant::now();
    let mut checks = Vec::new();
    if matches!(suite, Suite::R1 | Suite::All) {
        checks.extend(r1_checks(seed, tol));
    }
    if matches!(suite, Suite::R2 | Suite::All) {
        checks.extend(r2_checks(tol));
    }
    if matches!(suite, Suite::R3 | Suite::All) {
        checks.extend(r3_checks(seed, tol));
    }
    if matches!(suite, Suite::Oracle | Suite::All) {
        checks.extend(oracle_checks(seed, tol));
    }
    SuiteReport {
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for name in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap().to_string(), name);
        }
        assert!("r4".parse::<Suite>().is_err());
    }

    #[test]
    fn reference_covectors() {
        let [a, b] = reference_conjugate_covectors();
        assert_eq!(a[2], TAU);
        assert!((b[2] - 8.986818915818128).abs() < 1e-12);
    }

    #[test]
    fn r1_and_r2_pass() {
        let r = run_suite(Suite::R1, 42, 1e-10);
        assert!(r.passed(), "{:#?}", r.checks);
        let r = run_suite(Suite::R2, 42, 1e-10);
        assert!(r.passed(), "{:#?}", r.checks);
        assert_eq!(r.checks.len(), 6);
    }

    #[test]
    fn check_margins() {
        let c = Check::at_most(Suite::R1, "x", 0.5, 1.0);
        assert!(c.passed && c.margin() == 0.5);
        let c = Check::at_least(Suite::R1, "x", 0.5, 1.0);
        assert!(!c.passed && c.margin() == -0.5);
        assert!(c.to_string().starts_with("FAIL"));
    }
}
