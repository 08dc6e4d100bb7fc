//! Closed-form reference models used as ground truth in the test suite.
//!
//! Two exactly solvable chains:
//!
//! - square-root hopping `b_n = g√n`: the spread distribution is Poisson
//!   with mean `g²t²`, `K(t) = g²t²`, and
//!   `Z(χ,t) = exp(g²t² (e^{iχ} - 1))`;
//! - the su(1,1) family `b_n = α√(n(n-1+2k))`: negative-binomial spread
//!   `P(n,t) = C(n+2k-1, n) tanh^{2n}(αt) / cosh^{4k}(αt)`,
//!   `K(t) = 2k sinh²(αt)`, and
//!   `Z(χ,t) = ((1-q)/(1-e^{iχ} q))^{2k}` with `q = tanh²(αt)`.
//!
//! Probabilities are evaluated in the log domain with Gamma-function
//! binomial weights, so non-integer `2k` and large `n` are handled without
//! overflow.

use crate::{Error, Result};
use num_complex::Complex64;

/// One of the two exactly solvable models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormModel {
    /// Square-root hopping with scale `g > 0`.
    Poisson { g: f64 },
    /// su(1,1) ladder with rate `α > 0` and Bargmann index `k > 0`.
    Su11 { alpha: f64, k: f64 },
}

impl ClosedFormModel {
    pub fn poisson(g: f64) -> Result<Self> {
        if !(g > 0.0) {
            return Err(Error::Validation(format!("poisson model needs g > 0, got {g}")));
        }
        Ok(Self::Poisson { g })
    }

    pub fn su11(alpha: f64, k: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(k > 0.0) {
            return Err(Error::Validation(format!(
                "su11 model needs alpha > 0 and k > 0, got alpha={alpha}, k={k}"
            )));
        }
        Ok(Self::Su11 { alpha, k })
    }

    /// Spread probability `P(n, t)`.
    pub fn exact_p(&self, n: usize, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match *self {
            Self::Poisson { g } => {
                let mean = g * g * t * t;
                if mean == 0.0 {
                    return if n == 0 { 1.0 } else { 0.0 };
                }
                let ln_p = n as f64 * mean.ln() - mean - libm::lgamma(n as f64 + 1.0);
                ln_p.exp()
            }
            Self::Su11 { alpha, k } => {
                let q = (alpha * t).tanh().powi(2);
                if q == 0.0 {
                    return if n == 0 { 1.0 } else { 0.0 };
                }
                let nf = n as f64;
                // ln C(n + 2k - 1, n) with Gamma functions; the cosh^{-4k}
                // factor is (1-q)^{2k}.
                let ln_binom = libm::lgamma(nf + 2.0 * k) - libm::lgamma(nf + 1.0)
                    - libm::lgamma(2.0 * k);
                let ln_p = ln_binom + nf * q.ln() + 2.0 * k * (1.0 - q).ln();
                ln_p.exp()
            }
        }
    }

    /// Complexity `K(t)`.
    pub fn exact_k(&self, t: f64) -> f64 {
        match *self {
            Self::Poisson { g } => g * g * t * t,
            Self::Su11 { alpha, k } => 2.0 * k * (alpha * t).sinh().powi(2),
        }
    }

    /// Leading late-time term of `K(t)`: unchanged `g²t²` for the Poisson
    /// model, `(k/2) e^{2αt}` for su(1,1).
    pub fn late_time_k(&self, t: f64) -> f64 {
        match *self {
            Self::Poisson { g } => g * g * t * t,
            Self::Su11 { alpha, k } => 0.5 * k * (2.0 * alpha * t).exp(),
        }
    }

    /// Variance of the spread distribution.
    pub fn exact_variance(&self, t: f64) -> f64 {
        match *self {
            Self::Poisson { g } => g * g * t * t,
            Self::Su11 { alpha, k } => {
                let q = (alpha * t).tanh().powi(2);
                2.0 * k * q / ((1.0 - q) * (1.0 - q))
            }
        }
    }

    /// Characteristic function `Z(χ, t) = ⟨e^{iχ n̂}⟩`.
    pub fn exact_z(&self, chi: f64, t: f64) -> Complex64 {
        let phase = Complex64::new(0.0, chi).exp();
        match *self {
            Self::Poisson { g } => {
                let mean = g * g * t * t;
                ((phase - 1.0) * mean).exp()
            }
            Self::Su11 { alpha, k } => {
                let q = (alpha * t).tanh().powi(2);
                let w = Complex64::new(1.0 - q, 0.0) / (Complex64::ONE - phase * q);
                // Principal branch is safe: Re(1 - e^{iχ} q) > 0 for q < 1.
                (w.ln() * 2.0 * k).exp()
            }
        }
    }

    /// Truncation covering essentially all probability mass
    /// (mean + 40 standard deviations, at least 64 sites).
    pub fn suggested_support(&self, t: f64) -> usize {
        let n = self.exact_k(t) + 40.0 * self.exact_variance(t).sqrt();
        (n.ceil() as usize).max(64)
    }
}
