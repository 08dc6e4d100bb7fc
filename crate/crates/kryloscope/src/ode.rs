//! Adaptive embedded Runge–Kutta integration (Dormand–Prince 5(4)).
//!
//! The integrator steps internally under a per-step error tolerance and
//! lands exactly on each requested report time by clamping the step, so
//! reported states carry no interpolation error beyond the step tolerance.

use crate::{Error, Result};

/// Right-hand side of an autonomous-or-not first-order system.
pub trait OdeRhs {
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]);
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeRhs for F {
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        self(t, y, dydt)
    }
}

/// Integrator options. `tol` is applied as both absolute and relative
/// per-step tolerance.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub tol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_steps: 200_000_000, initial_step: None }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

// Dormand–Prince 5(4) tableau.
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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 4th-order embedded weights (via b - b*).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const SAFETY: f64 = 0.9;
const MIN_SHRINK: f64 = 0.2;
const MAX_GROW: f64 = 5.0;

/// Integrate from `times[0]`, invoking `observe(index, t, y)` at every
/// report time including the initial one. `times` must be strictly
/// increasing.
pub fn integrate_observed<F, O>(
    f: &F,
    y0: &[f64],
    times: &[f64],
    opts: OdeOptions,
    mut observe: O,
) -> Result<()>
where
    F: OdeRhs,
    O: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    if times.is_empty() {
        return Err(Error::Integration("empty time grid".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Integration("time grid must be strictly increasing".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Integration(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let dim = y0.len();
    let mut t = times[0];
    let mut y = y0.to_vec();
    observe(0, t, &y)?;
    if times.len() == 1 {
        return Ok(());
    }
    let t_end = *times.last().unwrap();

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];

    f.rhs(t, &y, &mut k1);
    let mut h = opts.initial_step.unwrap_or_else(|| initial_step_guess(&y, &k1, opts.tol, t_end - t));
    let mut next_report = 1usize;
    let mut fsal_valid = true;
    let mut just_rejected = false;

    for _ in 0..opts.max_steps {
        if next_report >= times.len() {
            return Ok(());
        }
        let t_target = times[next_report];
        let h_unclamped = h;
        let mut clamped = false;
        if t + h >= t_target {
            h = t_target - t;
            clamped = true;
        }
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::Integration(format!("step size degenerated to {h} at t = {t}")));
        }
        if !fsal_valid {
            f.rhs(t, &y, &mut k1);
            fsal_valid = true;
        }

        // Stage 2..6 and the 5th-order solution.
        for i in 0..dim {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        f.rhs(t + C2 * h, &stage, &mut k2);
        for i in 0..dim {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f.rhs(t + C3 * h, &stage, &mut k3);
        for i in 0..dim {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f.rhs(t + C4 * h, &stage, &mut k4);
        for i in 0..dim {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f.rhs(t + C5 * h, &stage, &mut k5);
        for i in 0..dim {
            stage[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f.rhs(t + h, &stage, &mut k6);
        for i in 0..dim {
            y_new[i] =
                y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        f.rhs(t + h, &y_new, &mut k7);

        // Scaled RMS error of the embedded pair.
        let mut err_sq = 0.0;
        for i in 0..dim {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = opts.tol + opts.tol * y[i].abs().max(y_new[i].abs());
            let r = e / scale;
            err_sq += r * r;
        }
        let err = (err_sq / dim as f64).sqrt();

        if !err.is_finite() {
            // Blow-up inside the step; retry much smaller.
            h *= MIN_SHRINK;
            fsal_valid = false;
            continue;
        }

        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            if clamped {
                // Landed exactly on a report time; resume from the step the
                // controller actually wanted.
                observe(next_report, t_target, &y)?;
                next_report += 1;
                h = h_unclamped;
            } else if just_rejected {
                // Hold the step after a rejection to avoid thrash at a
                // stability boundary.
            } else {
                let grow = if err == 0.0 { MAX_GROW } else { SAFETY * err.powf(-0.2) };
                h *= grow.clamp(MIN_SHRINK, MAX_GROW);
            }
            just_rejected = false;
        } else {
            h *= (SAFETY * err.powf(-0.2)).clamp(MIN_SHRINK, 1.0);
            fsal_valid = true; // k1 still matches (t, y)
            just_rejected = true;
        }
    }
    Err(Error::Integration(format!(
        "exceeded {} steps before reaching t = {t_end}",
        opts.max_steps
    )))
}

/// Integrate and collect the state at every report time.
pub fn integrate_at<F: OdeRhs>(
    f: &F,
    y0: &[f64],
    times: &[f64],
    opts: OdeOptions,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(times.len());
    integrate_observed(f, y0, times, opts, |_, _, y| {
        out.push(y.to_vec());
        Ok(())
    })?;
    Ok(out)
}

fn initial_step_guess(y: &[f64], dydt: &[f64], tol: f64, span: f64) -> f64 {
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d_norm = dydt.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = if d_norm > 1e-300 {
        0.01 * (y_norm.max(tol) / d_norm)
    } else {
        span * 1e-3
    };
    h.min(span).max(span * 1e-12)
}
