//! Dormand–Prince 5(4) with PI step-size control (Hairer, Nørsett & Wanner,
//! `DOPRI5`). Steps are clamped so that requested output times are hit
//! exactly; no dense output is used.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl StepControl {
    /// Relative tolerance `tol` with an absolute floor of `1e-13`.
    pub fn from_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: (tol * 1e-3).max(1e-13),
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrate `y' = f(t, y)` from `t0` to the last entry of `stops`.
///
/// `stops` must be strictly increasing and greater than `t0`; each one is
/// landed on exactly. `on_step(t, y, is_stop)` is called after every
/// accepted step. Returns the step statistics.
pub fn integrate<F, G>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    stops: &[f64],
    ctl: StepControl,
    mut on_step: G,
) -> Result<Stats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: FnMut(f64, &[f64], bool),
{
    let dim = y0.len();
    let Some(&t_end) = stops.last() else {
        return Ok(Stats::default());
    };
    if stops.windows(2).any(|w| w[1] <= w[0]) || stops[0] <= t0 {
        return Err(Error::InvalidArgument(
            "output times must be increasing and after the start time".into(),
        ));
    }

    let mut stats = Stats::default();
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; dim];
    let mut y_stage = vec![0.0; dim];
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; dim]);
    let mut err_vec = vec![0.0; dim];

    let scale = |a: f64, b: f64| ctl.atol + ctl.rtol * a.abs().max(b.abs());
    let rms = |v: &[f64], y: &[f64], y2: &[f64]| -> f64 {
        let s: f64 = v
            .iter()
            .zip(y.iter().zip(y2))
            .map(|(e, (a, b))| {
                let r = e / scale(*a, *b);
                r * r
            })
            .sum();
        (s / dim.max(1) as f64).sqrt()
    };

    let mut t = t0;
    f(t, &y, &mut k[0]);
    stats.evaluations += 1;

    // Initial step guess.
    let mut h = {
        let d0 = rms(&y, &y, &y);
        let d1 = rms(&k[0], &y, &y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(t_end - t0);
        for i in 0..dim {
            y_stage[i] = y[i] + h0 * k[0][i];
        }
        f(t + h0, &y_stage, &mut k[1]);
        stats.evaluations += 1;
        for i in 0..dim {
            err_vec[i] = (k[1][i] - k[0][i]) / h0;
        }
        let d2 = rms(&err_vec, &y, &y);
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    };

    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    let mut next_stop = 0;

    while t < t_end {
        if stats.accepted + stats.rejected >= ctl.max_steps {
            return Err(Error::StepBudget(ctl.max_steps));
        }
        let target = stops[next_stop];
        let mut hit_stop = false;
        if t + h >= target - 1e-14 * target.abs().max(1.0) {
            h = target - t;
            hit_stop = true;
        }
        if h.abs() <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, h });
        }

        // stages
        for i in 0..dim {
            y_stage[i] = y[i] + h * A21 * k[0][i];
        }
        f(t + C2 * h, &y_stage, &mut k[1]);
        for i in 0..dim {
            y_stage[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        f(t + C3 * h, &y_stage, &mut k[2]);
        for i in 0..dim {
            y_stage[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        f(t + C4 * h, &y_stage, &mut k[3]);
        for i in 0..dim {
            y_stage[i] =
                y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        f(t + C5 * h, &y_stage, &mut k[4]);
        for i in 0..dim {
            y_stage[i] = y[i]
                + h * (A61 * k[0][i]
                    + A62 * k[1][i]
                    + A63 * k[2][i]
                    + A64 * k[3][i]
                    + A65 * k[4][i]);
        }
        f(t + h, &y_stage, &mut k[5]);
        for i in 0..dim {
            y_new[i] = y[i]
                + h * (A71 * k[0][i]
                    + A73 * k[2][i]
                    + A74 * k[3][i]
                    + A75 * k[4][i]
                    + A76 * k[5][i]);
        }
        f(t + h, &y_new, &mut k[6]);
        stats.evaluations += 6;

        for i in 0..dim {
            err_vec[i] = h
                * (E1 * k[0][i]
                    + E3 * k[2][i]
                    + E4 * k[3][i]
                    + E5 * k[4][i]
                    + E6 * k[5][i]
                    + E7 * k[6][i]);
        }
        let err = rms(&err_vec, &y, &y_new);

        if !err.is_finite() {
            stats.rejected += 1;
            last_rejected = true;
            h *= FAC_MIN;
            if h.abs() <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::NonFinite { t });
            }
            continue;
        }

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = (fac11 / fac_old.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            fac_old = err.max(1e-4);
            stats.accepted += 1;
            t = if hit_stop { target } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { t });
            }
            on_step(t, &y, hit_stop);
            if hit_stop {
                next_stop += 1;
                // the clamped step says nothing about the natural step size
                h_new = h_new.max(h);
            }
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new;
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h /= (fac11 / SAFE).min(1.0 / FAC_MIN);
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut last = (0.0, 0.0);
        let stats = integrate(
            |_, y, dy| dy[0] = -y[0],
            0.0,
            &[1.0],
            &[2.0],
            StepControl::from_tol(1e-10),
            |t, y, _| last = (t, y[0]),
        )
        .unwrap();
        assert_eq!(last.0, 2.0);
        assert!((last.1 - (-2.0f64).exp()).abs() < 1e-10);
        assert!(stats.accepted > 5);
    }

    #[test]
    fn harmonic_oscillator_lands_on_stops() {
        let stops: Vec<f64> = (1..=10).map(|i| i as f64 * 0.7).collect();
        let mut hits = Vec::new();
        integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &stops,
            StepControl::from_tol(1e-11),
            |t, y, stop| {
                if stop {
                    hits.push((t, y[0]));
                }
            },
        )
        .unwrap();
        assert_eq!(hits.len(), stops.len());
        for ((t, x), s) in hits.iter().zip(&stops) {
            assert_eq!(t, s);
            assert!((x - t.cos()).abs() < 1e-9, "{t} {x}");
        }
    }

    #[test]
    fn stationary_system_takes_few_steps() {
        let mut n = 0;
        integrate(
            |_, _, dy| dy.iter_mut().for_each(|d| *d = 0.0),
            0.0,
            &[3.0, -1.0],
            &[1.0],
            StepControl::from_tol(1e-10),
            |_, y, _| {
                n += 1;
                assert_eq!(y, &[3.0, -1.0]);
            },
        )
        .unwrap();
        assert!(n < 20);
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y², y(0) = 1 blows up at t = 1
        let err = integrate(
            |_, y, dy| dy[0] = y[0] * y[0],
            0.0,
            &[1.0],
            &[2.0],
            StepControl::from_tol(1e-10),
            |_, _, _| {},
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                Error::StepUnderflow { .. } | Error::NonFinite { .. } | Error::StepBudget(_)
            ),
            "{err:?}"
        );
    }

    #[test]
    fn rejects_bad_stops() {
        assert!(integrate(
            |_, _, _| {},
            0.0,
            &[0.0],
            &[0.5, 0.2],
            StepControl::from_tol(1e-8),
            |_, _, _| {}
        )
        .is_err());
    }
}
