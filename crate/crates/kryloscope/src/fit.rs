//! Small least-squares helpers shared across modules.

use crate::{Error, Result};

/// Result of a straight-line fit `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination.
    pub r_squared: f64,
    /// Standard error of the slope estimate.
    pub slope_stderr: f64,
}

/// Ordinary least squares for a line through `(x, y)` samples.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit(format!("line fit needs >= 2 paired samples, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    if sxx == 0.0 {
        return Err(Error::Fit("degenerate abscissa (all x equal)".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - (intercept + slope * xi);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let dof = (x.len().saturating_sub(2)).max(1) as f64;
    let slope_stderr = (ss_res / dof / sxx).sqrt();
    Ok(LineFit { slope, intercept, r_squared, slope_stderr })
}

/// Least squares for `y ≈ c0·f0(x) + c1·f1(x)` in a two-function basis,
/// returning `(c0, c1, rms_residual)`.
pub fn fit_two_basis(f0: &[f64], f1: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = y.len();
    if f0.len() != n || f1.len() != n || n < 3 {
        return Err(Error::Fit("two-basis fit needs >= 3 consistent samples".into()));
    }
    let mut a00 = 0.0;
    let mut a01 = 0.0;
    let mut a11 = 0.0;
    let mut b0 = 0.0;
    let mut b1 = 0.0;
    for i in 0..n {
        a00 += f0[i] * f0[i];
        a01 += f0[i] * f1[i];
        a11 += f1[i] * f1[i];
        b0 += f0[i] * y[i];
        b1 += f1[i] * y[i];
    }
    let det = a00 * a11 - a01 * a01;
    if det.abs() < 1e-300 {
        return Err(Error::Fit("singular normal equations".into()));
    }
    let c0 = (a11 * b0 - a01 * b1) / det;
    let c1 = (a00 * b1 - a01 * b0) / det;
    let ss: f64 = (0..n)
        .map(|i| {
            let r = y[i] - c0 * f0[i] - c1 * f1[i];
            r * r
        })
        .sum();
    Ok((c0, c1, (ss / n as f64).sqrt()))
}
