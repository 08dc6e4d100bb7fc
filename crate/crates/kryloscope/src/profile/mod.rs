//! Lanczos-coefficient profiles.
//!
//! A [`LanczosProfile`] is a sequence `b_n` (n ≥ 1, with `b_0 = 0` by
//! convention) of non-negative hopping amplitudes, given either by one of the
//! analytic families below or by tabulated values. Analytic families extend
//! smoothly to real `n`, which is what the semiclassical flow evaluates;
//! tabulated profiles are extended by monotone cubic (PCHIP) interpolation.
//!
//! Families:
//!
//! - `sqrt_hopping(g)`:      `b_n = g √n`
//! - `su11(α, k)`:           `b_n = α √(n (n - 1 + 2k))`
//! - `linear_shift(α, γ)`:   `b_n = α n + γ`
//! - `log_drift(α, β)`:      `b_n = α n + β ln n`
//! - `marginal(α, ε)`:       `b_n = α n (1 + ε / ln n)`, defined for n ≥ 2
//! - `power_law(a, γ)`:      `b_n = a n^γ`
//! - `crossover(α, γ, n*)`:  `b_n = α n x/(1+x) + γ` with `x = n/n*`
//!
//! The marginal family is singular at `n = 1`; strict evaluation there is a
//! domain error, while chain construction and the continuous extension use
//! the linear extrapolation `b(1) = b(2)/2` toward `b(0) = 0` (small-n values
//! of this family are non-universal).

mod lanczos;
mod liouvillian;
mod pchip;

pub use lanczos::{
    lanczos_tridiagonalize, tridiagonal_from_profile, ReorthPolicy, TridiagonalDecomposition,
};
pub use liouvillian::{build_liouvillian, OperatorSpaceProblem};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// Header line identifying a tabulated-profile CSV file.
pub const PROFILE_CSV_HEADER: &str = "# kryloscope-profile v1";

/// The analytic family (or tabulated data) behind a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProfileKind {
    SqrtHopping { g: f64 },
    Su11 { alpha: f64, k: f64 },
    LinearShift { alpha: f64, gamma: f64 },
    LogDrift { alpha: f64, beta: f64 },
    Marginal { alpha: f64, epsilon: f64 },
    PowerLaw { amplitude: f64, gamma_exp: f64 },
    Crossover { alpha: f64, gamma: f64, n_star: f64 },
    Tabulated { values: Vec<f64> },
}

/// A Lanczos-coefficient sequence with optional diagonal terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanczosProfile {
    kind: ProfileKind,
    /// Default chain truncation (number of sites) for tabulated use.
    n_max: usize,
    /// Optional diagonal coefficients `a_n` (n ≥ 0); all zero when absent.
    diagonal: Option<Vec<f64>>,
}

const DEFAULT_N_MAX: usize = 256;

impl LanczosProfile {
    fn validated(kind: ProfileKind, n_max: usize) -> Result<Self> {
        match &kind {
            ProfileKind::SqrtHopping { g } => {
                if !g.is_finite() || *g <= 0.0 {
                    return Err(Error::Validation(format!("sqrt_hopping needs g > 0, got {g}")));
                }
            }
            ProfileKind::Su11 { alpha, k } => {
                if !alpha.is_finite() || *alpha <= 0.0 {
                    return Err(Error::Validation(format!("su11 needs alpha > 0, got {alpha}")));
                }
                if !k.is_finite() || *k <= 0.0 {
                    return Err(Error::Validation(format!("su11 needs Bargmann index k > 0, got {k}")));
                }
            }
            ProfileKind::LinearShift { alpha, gamma } => {
                if !alpha.is_finite() || *alpha < 0.0 || !gamma.is_finite() {
                    return Err(Error::Validation(format!(
                        "linear_shift needs alpha >= 0 and finite gamma, got alpha={alpha}, gamma={gamma}"
                    )));
                }
                if alpha + gamma < 0.0 {
                    return Err(Error::Validation(format!(
                        "linear_shift has b(1) = {} < 0",
                        alpha + gamma
                    )));
                }
            }
            ProfileKind::LogDrift { alpha, beta } => {
                if !alpha.is_finite() || *alpha <= 0.0 || !beta.is_finite() {
                    return Err(Error::Validation(format!(
                        "log_drift needs alpha > 0 and finite beta, got alpha={alpha}, beta={beta}"
                    )));
                }
                if *beta < 0.0 {
                    // Minimum of αn + β ln n over n ≥ 1 sits at n = -β/α.
                    let n_min = (-beta / alpha).max(1.0);
                    let b_min = alpha * n_min + beta * n_min.ln();
                    if b_min < 0.0 {
                        return Err(Error::Validation(format!(
                            "log_drift dips negative (b({n_min:.3}) = {b_min:.3e})"
                        )));
                    }
                }
            }
            ProfileKind::Marginal { alpha, epsilon } => {
                if !alpha.is_finite() || *alpha <= 0.0 || !epsilon.is_finite() {
                    return Err(Error::Validation(format!(
                        "marginal needs alpha > 0 and finite epsilon, got alpha={alpha}, epsilon={epsilon}"
                    )));
                }
                let b2 = alpha * 2.0 * (1.0 + epsilon / 2f64.ln());
                if b2 < 0.0 {
                    return Err(Error::Validation(format!("marginal has b(2) = {b2:.3e} < 0")));
                }
            }
            ProfileKind::PowerLaw { amplitude, gamma_exp } => {
                if !amplitude.is_finite() || *amplitude <= 0.0 {
                    return Err(Error::Validation(format!(
                        "power_law needs amplitude > 0, got {amplitude}"
                    )));
                }
                if !gamma_exp.is_finite() || *gamma_exp <= 0.0 {
                    return Err(Error::Validation(format!(
                        "power_law needs gamma_exp > 0, got {gamma_exp}"
                    )));
                }
            }
            ProfileKind::Crossover { alpha, gamma, n_star } => {
                if !alpha.is_finite() || *alpha <= 0.0 {
                    return Err(Error::Validation(format!("crossover needs alpha > 0, got {alpha}")));
                }
                if !gamma.is_finite() || *gamma < 0.0 {
                    return Err(Error::Validation(format!("crossover needs gamma >= 0, got {gamma}")));
                }
                if !n_star.is_finite() || *n_star <= 0.0 {
                    return Err(Error::Validation(format!("crossover needs n_star > 0, got {n_star}")));
                }
            }
            ProfileKind::Tabulated { values } => {
                if values.is_empty() {
                    return Err(Error::Validation("tabulated profile is empty".into()));
                }
                for (i, v) in values.iter().enumerate() {
                    if !v.is_finite() || *v < 0.0 {
                        return Err(Error::Validation(format!(
                            "tabulated b_{} = {v} is not a finite non-negative real",
                            i + 1
                        )));
                    }
                }
            }
        }
        let n_max = match &kind {
            ProfileKind::Tabulated { values } => values.len() + 1,
            _ => n_max,
        };
        Ok(Self { kind, n_max, diagonal: None })
    }

    pub fn sqrt_hopping(g: f64) -> Result<Self> {
        Self::validated(ProfileKind::SqrtHopping { g }, DEFAULT_N_MAX)
    }

    pub fn su11(alpha: f64, k: f64) -> Result<Self> {
        Self::validated(ProfileKind::Su11 { alpha, k }, DEFAULT_N_MAX)
    }

    pub fn linear_shift(alpha: f64, gamma: f64) -> Result<Self> {
        Self::validated(ProfileKind::LinearShift { alpha, gamma }, DEFAULT_N_MAX)
    }

    /// Pure linear fixed point `b_n = α n`.
    pub fn linear(alpha: f64) -> Result<Self> {
        Self::linear_shift(alpha, 0.0)
    }

    pub fn log_drift(alpha: f64, beta: f64) -> Result<Self> {
        Self::validated(ProfileKind::LogDrift { alpha, beta }, DEFAULT_N_MAX)
    }

    pub fn marginal(alpha: f64, epsilon: f64) -> Result<Self> {
        Self::validated(ProfileKind::Marginal { alpha, epsilon }, DEFAULT_N_MAX)
    }

    pub fn power_law(amplitude: f64, gamma_exp: f64) -> Result<Self> {
        Self::validated(ProfileKind::PowerLaw { amplitude, gamma_exp }, DEFAULT_N_MAX)
    }

    pub fn crossover(alpha: f64, gamma: f64, n_star: f64) -> Result<Self> {
        Self::validated(ProfileKind::Crossover { alpha, gamma, n_star }, DEFAULT_N_MAX)
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        Self::validated(ProfileKind::Tabulated { values }, 0)
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        if !matches!(self.kind, ProfileKind::Tabulated { .. }) {
            self.n_max = n_max.max(1);
        }
        self
    }

    /// Attach diagonal coefficients `a_n`, n = 0..len-1.
    pub fn with_diagonal(mut self, diagonal: Vec<f64>) -> Self {
        self.diagonal = Some(diagonal);
        self
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn diagonal(&self) -> Option<&[f64]> {
        self.diagonal.as_deref()
    }

    pub fn has_nonzero_diagonal(&self) -> bool {
        self.diagonal
            .as_ref()
            .is_some_and(|a| a.iter().any(|&v| v != 0.0))
    }

    /// Diagonal coefficient `a_n`, zero when no diagonal is recorded.
    pub fn diagonal_at(&self, n: usize) -> f64 {
        self.diagonal
            .as_ref()
            .and_then(|a| a.get(n).copied())
            .unwrap_or(0.0)
    }

    /// Number of tabulated couplings, if this profile is tabulated.
    pub fn tabulated_len(&self) -> Option<usize> {
        match &self.kind {
            ProfileKind::Tabulated { values } => Some(values.len()),
            _ => None,
        }
    }

    /// Asymptotic linear scale of the family (`α`, or `g`/amplitude where no
    /// linear slope exists). Used for default step sizes.
    pub fn rate_scale(&self) -> f64 {
        match &self.kind {
            ProfileKind::SqrtHopping { g } => *g,
            ProfileKind::Su11 { alpha, .. }
            | ProfileKind::LinearShift { alpha, .. }
            | ProfileKind::LogDrift { alpha, .. }
            | ProfileKind::Marginal { alpha, .. }
            | ProfileKind::Crossover { alpha, .. } => *alpha,
            ProfileKind::PowerLaw { amplitude, .. } => *amplitude,
            ProfileKind::Tabulated { .. } => 1.0,
        }
    }

    /// Strict evaluation of `b_n` at integer `n ≥ 1`.
    ///
    /// The marginal family is a domain error at `n = 1` (see module docs);
    /// tabulated profiles reject out-of-range indices.
    pub fn eval_b(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("b_n is defined for n >= 1 (b_0 = 0 by convention)".into()));
        }
        let x = n as f64;
        match &self.kind {
            ProfileKind::SqrtHopping { g } => Ok(g * x.sqrt()),
            ProfileKind::Su11 { alpha, k } => Ok(alpha * (x * (x - 1.0 + 2.0 * k)).sqrt()),
            ProfileKind::LinearShift { alpha, gamma } => Ok(alpha * x + gamma),
            ProfileKind::LogDrift { alpha, beta } => Ok(alpha * x + beta * x.ln()),
            ProfileKind::Marginal { alpha, epsilon } => {
                if n < 2 {
                    Err(Error::Domain(
                        "marginal family is singular at n = 1; defined for n >= 2".into(),
                    ))
                } else {
                    Ok(alpha * x * (1.0 + epsilon / x.ln()))
                }
            }
            ProfileKind::PowerLaw { amplitude, gamma_exp } => Ok(amplitude * x.powf(*gamma_exp)),
            ProfileKind::Crossover { alpha, gamma, n_star } => {
                let r = x / n_star;
                Ok(alpha * x * r / (1.0 + r) + gamma)
            }
            ProfileKind::Tabulated { values } => values
                .get(n - 1)
                .copied()
                .ok_or(Error::IndexOutOfRange { index: n, len: values.len() }),
        }
    }

    /// Derivative `b'(n)` at real `n ≥ 1`.
    ///
    /// Analytic for closed-form families. For tabulated profiles the value at
    /// integer `n` is the central finite difference `(b(n+1) - b(n-1))/2`
    /// (one-sided at the boundary); non-integer arguments use the derivative
    /// of the monotone cubic interpolant.
    pub fn eval_b_prime(&self, n: f64) -> Result<f64> {
        if !(n >= 1.0) {
            return Err(Error::Domain(format!("b'(n) requires n >= 1, got {n}")));
        }
        if let ProfileKind::Tabulated { values } = &self.kind {
            let rounded = n.round();
            if (n - rounded).abs() < 1e-9 && rounded >= 1.0 {
                let i = rounded as usize;
                let len = values.len();
                if i > len {
                    return Err(Error::IndexOutOfRange { index: i, len });
                }
                // b_0 = 0 participates in the centered stencil at i = 1.
                let at = |j: usize| -> f64 {
                    if j == 0 {
                        0.0
                    } else {
                        values[j - 1]
                    }
                };
                return Ok(if i < len {
                    (at(i + 1) - at(i - 1)) / 2.0
                } else {
                    at(i) - at(i - 1)
                });
            }
        }
        Ok(self.b_prime_cont(n))
    }

    /// Continuous-`n` view of the profile. For tabulated profiles this
    /// builds the PCHIP interpolant once; reuse the returned value inside
    /// integration loops.
    pub fn smooth(&self) -> SmoothProfile<'_> {
        let interp = match &self.kind {
            ProfileKind::Tabulated { values } => Some(pchip::Pchip::from_couplings(values)),
            _ => None,
        };
        SmoothProfile { kind: &self.kind, interp }
    }

    /// Continuous extension of `b` to real argument `x ≥ 0`.
    ///
    /// Marginal profiles interpolate linearly toward `b(0) = 0` below
    /// `x = 2`; tabulated profiles use PCHIP through `(0, 0), (1, b_1), ...`
    /// with linear extrapolation beyond the table.
    pub fn b_cont(&self, x: f64) -> f64 {
        self.smooth().b(x)
    }

    /// Derivative of the continuous extension.
    pub fn b_prime_cont(&self, x: f64) -> f64 {
        self.smooth().b_prime(x)
    }

    /// Second derivative of the continuous extension.
    pub fn b_double_prime_cont(&self, x: f64) -> f64 {
        self.smooth().b_double_prime(x)
    }

    /// Couplings `b_1 .. b_{n_sites-1}` for an `n_sites`-site chain.
    ///
    /// This is the chain-construction path: the marginal family uses the
    /// extrapolated `b(1) = b(2)/2` here rather than erroring.
    pub fn chain_couplings(&self, n_sites: usize) -> Result<Vec<f64>> {
        if n_sites == 0 {
            return Err(Error::Validation("chain needs at least one site".into()));
        }
        let mut out = Vec::with_capacity(n_sites.saturating_sub(1));
        for n in 1..n_sites {
            let b = match (&self.kind, n) {
                (ProfileKind::Marginal { alpha, epsilon }, 1) => {
                    alpha * 2.0 * (1.0 + epsilon / 2f64.ln()) / 2.0
                }
                _ => self.eval_b(n)?,
            };
            if !b.is_finite() {
                return Err(Error::Validation(format!("b_{n} = {b} is not finite")));
            }
            out.push(b);
        }
        Ok(out)
    }

    /// Write a tabulated snapshot as two-column CSV.
    ///
    /// Analytic families are materialized at `n = 1..=n_max-1` (marginal via
    /// the chain convention).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{PROFILE_CSV_HEADER}")?;
        let values = self
            .chain_couplings(self.n_max.max(2))
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        for (i, b) in values.iter().enumerate() {
            writeln!(w, "{},{:.17e}", i + 1, b)?;
        }
        Ok(())
    }

    pub fn write_csv_file<P: AsRef<Path>>(&self, path: P) -> std::io::Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Parse a tabulated profile from the two-column CSV format.
    ///
    /// Errors carry the 1-based line number of the offending row.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut values = Vec::new();
        let mut saw_header = false;
        for (idx, line) in r.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Validation(format!("line {lineno}: {e}")))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if !saw_header {
                if line != PROFILE_CSV_HEADER {
                    return Err(Error::Validation(format!(
                        "line {lineno}: expected header `{PROFILE_CSV_HEADER}`, found `{line}`"
                    )));
                }
                saw_header = true;
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let n: usize = parts
                .next()
                .ok_or_else(|| Error::Validation(format!("line {lineno}: missing n column")))?
                .trim()
                .parse()
                .map_err(|e| Error::Validation(format!("line {lineno}: bad index: {e}")))?;
            let b: f64 = parts
                .next()
                .ok_or_else(|| Error::Validation(format!("line {lineno}: missing b column")))?
                .trim()
                .parse()
                .map_err(|e| Error::Validation(format!("line {lineno}: bad value: {e}")))?;
            if parts.next().is_some() {
                return Err(Error::Validation(format!("line {lineno}: more than two columns")));
            }
            if n != values.len() + 1 {
                return Err(Error::Validation(format!(
                    "line {lineno}: expected n = {}, found {n}",
                    values.len() + 1
                )));
            }
            values.push(b);
        }
        if !saw_header {
            return Err(Error::Validation(format!("missing `{PROFILE_CSV_HEADER}` header line")));
        }
        Self::tabulated(values)
    }

    pub fn read_csv_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let f = std::fs::File::open(&path).map_err(|e| {
            Error::Validation(format!("cannot open {}: {e}", path.as_ref().display()))
        })?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// Continuous-`n` evaluator for a profile, cheap to call repeatedly.
#[derive(Debug, Clone)]
pub struct SmoothProfile<'a> {
    kind: &'a ProfileKind,
    interp: Option<pchip::Pchip>,
}

impl SmoothProfile<'_> {
    pub fn b(&self, x: f64) -> f64 {
        match self.kind {
            ProfileKind::SqrtHopping { g } => g * x.max(0.0).sqrt(),
            ProfileKind::Su11 { alpha, k } => {
                let u = x * (x - 1.0 + 2.0 * k);
                alpha * u.max(0.0).sqrt()
            }
            ProfileKind::LinearShift { alpha, gamma } => alpha * x + gamma,
            ProfileKind::LogDrift { alpha, beta } => {
                if x <= 1.0 {
                    alpha * x
                } else {
                    alpha * x + beta * x.ln()
                }
            }
            ProfileKind::Marginal { alpha, epsilon } => {
                if x < 2.0 {
                    // Linear ramp matching b(1) = b(2)/2, b(0) = 0.
                    let b2 = alpha * 2.0 * (1.0 + epsilon / 2f64.ln());
                    b2 * x / 2.0
                } else {
                    alpha * x * (1.0 + epsilon / x.ln())
                }
            }
            ProfileKind::PowerLaw { amplitude, gamma_exp } => {
                amplitude * x.max(0.0).powf(*gamma_exp)
            }
            ProfileKind::Crossover { alpha, gamma, n_star } => {
                let r = x / n_star;
                alpha * x * r / (1.0 + r) + gamma
            }
            ProfileKind::Tabulated { .. } => self.interp.as_ref().unwrap().value(x),
        }
    }

    pub fn b_prime(&self, x: f64) -> f64 {
        match self.kind {
            ProfileKind::SqrtHopping { g } => 0.5 * g / x.max(f64::MIN_POSITIVE).sqrt(),
            ProfileKind::Su11 { alpha, k } => {
                let u = (x * (x - 1.0 + 2.0 * k)).max(f64::MIN_POSITIVE);
                alpha * (2.0 * x - 1.0 + 2.0 * k) / (2.0 * u.sqrt())
            }
            ProfileKind::LinearShift { alpha, .. } => *alpha,
            ProfileKind::LogDrift { alpha, beta } => {
                if x <= 1.0 {
                    *alpha
                } else {
                    alpha + beta / x
                }
            }
            ProfileKind::Marginal { alpha, epsilon } => {
                if x < 2.0 {
                    alpha * (1.0 + epsilon / 2f64.ln())
                } else {
                    let u = x.ln();
                    alpha * (1.0 + epsilon / u - epsilon / (u * u))
                }
            }
            ProfileKind::PowerLaw { amplitude, gamma_exp } => {
                amplitude * gamma_exp * x.max(f64::MIN_POSITIVE).powf(gamma_exp - 1.0)
            }
            ProfileKind::Crossover { alpha, n_star, .. } => {
                let s = x + n_star;
                alpha * x * (x + 2.0 * n_star) / (s * s)
            }
            ProfileKind::Tabulated { .. } => self.interp.as_ref().unwrap().derivative(x),
        }
    }

    pub fn b_double_prime(&self, x: f64) -> f64 {
        match self.kind {
            ProfileKind::SqrtHopping { g } => -0.25 * g * x.max(f64::MIN_POSITIVE).powf(-1.5),
            ProfileKind::Su11 { alpha, k } => {
                let c = 2.0 * k - 1.0;
                let u = (x * (x + c)).max(f64::MIN_POSITIVE);
                -alpha * c * c / (4.0 * u.powf(1.5))
            }
            ProfileKind::LinearShift { .. } => 0.0,
            ProfileKind::LogDrift { beta, .. } => {
                if x <= 1.0 {
                    0.0
                } else {
                    -beta / (x * x)
                }
            }
            ProfileKind::Marginal { alpha, epsilon } => {
                if x < 2.0 {
                    0.0
                } else {
                    let u = x.ln();
                    alpha * epsilon * (2.0 / (u * u * u) - 1.0 / (u * u)) / x
                }
            }
            ProfileKind::PowerLaw { amplitude, gamma_exp } => {
                amplitude
                    * gamma_exp
                    * (gamma_exp - 1.0)
                    * x.max(f64::MIN_POSITIVE).powf(gamma_exp - 2.0)
            }
            ProfileKind::Crossover { alpha, n_star, .. } => {
                let s = x + n_star;
                2.0 * alpha * n_star * n_star / (s * s * s)
            }
            ProfileKind::Tabulated { .. } => {
                // The interpolant is only C¹; use a second difference of its
                // derivative.
                let h = 1e-3;
                let xm = (x - h).max(0.0);
                (self.b_prime(x + h) - self.b_prime(xm)) / (x + h - xm)
            }
        }
    }
}
