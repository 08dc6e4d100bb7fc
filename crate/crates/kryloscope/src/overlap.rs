//! Generating-state overlap series.
//!
//! The states `|z) = e^{z L₊} |K₀⟩` built from the raising part of a
//! tridiagonalized generator have overlap
//!
//! ```text
//! (z̄|z) = Σ_{n≥0} wⁿ/(n!)² Π_{m=1}^{n} b_m²,     w = z̄z ≥ 0,
//! ```
//!
//! fixed entirely by the Lanczos coefficients (the n = 0 term is 1, the
//! empty product). Weighting the series by `n^m` and normalizing gives the
//! Krylov moments of `|z)`. Terms are accumulated in the log domain, so
//! `(n!)²` never overflows; for tabulated profiles of length `L` the
//! series terminates exactly at `n = L`.

use crate::profile::LanczosProfile;
use crate::{Error, Result};
use serde::Serialize;

/// Hard cap on the number of series terms before reporting divergence.
pub const MAX_TERMS: usize = 1_000_000;

/// A summed overlap series with its truncation diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct OverlapSeries {
    /// `w = z̄z`.
    pub w: f64,
    /// Series value `(z̄|z)`.
    pub value: f64,
    /// `ln (z̄|z)`, reliable even when `value` saturates.
    pub ln_value: f64,
    /// Partial sums (non-decreasing; linear domain, may saturate to ∞ for
    /// extreme `w`).
    pub partial_sums: Vec<f64>,
    /// Index of the last term added.
    pub truncation_n: usize,
    /// Magnitude of the last term relative to the sum.
    pub tail_estimate: f64,
}

/// Log-domain accumulator for Σ exp(ln tᵢ) with a running maximum.
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    fn new() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }

    fn add(&mut self, ln_term: f64) {
        if ln_term == f64::NEG_INFINITY {
            return;
        }
        if ln_term > self.max {
            self.scaled = self.scaled * (self.max - ln_term).exp() + 1.0;
            self.max = ln_term;
        } else {
            self.scaled += (ln_term - self.max).exp();
        }
    }

    fn ln_value(&self) -> f64 {
        if self.scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Sum the overlap series at `w = z̄z` until the running term falls below
/// `tol` relative to the partial sum (and the terms are decreasing).
pub fn overlap(profile: &LanczosProfile, w: f64, tol: f64) -> Result<OverlapSeries> {
    if !(w >= 0.0) {
        return Err(Error::Domain(format!("overlap needs w = z̄ z >= 0, got {w}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let natural_len = profile.tabulated_len();

    let mut sum = LogSum::new();
    let mut partial_sums = Vec::new();
    let mut ln_term = 0.0_f64; // n = 0 term is 1
    sum.add(ln_term);
    partial_sums.push(sum.ln_value().exp());
    if w == 0.0 {
        return Ok(OverlapSeries {
            w,
            value: 1.0,
            ln_value: 0.0,
            partial_sums,
            truncation_n: 0,
            tail_estimate: 0.0,
        });
    }

    let ln_w = w.ln();
    let mut n = 0usize;
    let mut prev_ln_term = ln_term;
    loop {
        if let Some(len) = natural_len {
            if n >= len {
                // b_{n+1} = 0: the series terminates exactly.
                return Ok(OverlapSeries {
                    w,
                    value: sum.ln_value().exp(),
                    ln_value: sum.ln_value(),
                    partial_sums,
                    truncation_n: n,
                    tail_estimate: 0.0,
                });
            }
        }
        n += 1;
        if n > MAX_TERMS {
            return Err(Error::NoConvergence {
                iterations: MAX_TERMS,
                partial: sum.ln_value().exp(),
            });
        }
        let b = profile.eval_b(n).unwrap_or_else(|_| {
            // Chain convention for the marginal family at n = 1.
            profile.chain_couplings(n + 1).map(|c| c[n - 1]).unwrap_or(f64::NAN)
        });
        if !b.is_finite() {
            return Err(Error::Validation(format!("b_{n} is not finite")));
        }
        if b == 0.0 {
            // Zero coupling truncates the Krylov space.
            return Ok(OverlapSeries {
                w,
                value: sum.ln_value().exp(),
                ln_value: sum.ln_value(),
                partial_sums,
                truncation_n: n - 1,
                tail_estimate: 0.0,
            });
        }
        ln_term += ln_w + 2.0 * b.ln() - 2.0 * (n as f64).ln();
        sum.add(ln_term);
        partial_sums.push(sum.ln_value().exp());
        let tail = (ln_term - sum.ln_value()).exp();
        if tail < tol && ln_term < prev_ln_term {
            return Ok(OverlapSeries {
                w,
                value: sum.ln_value().exp(),
                ln_value: sum.ln_value(),
                partial_sums,
                truncation_n: n,
                tail_estimate: tail,
            });
        }
        prev_ln_term = ln_term;
    }
}

/// Normalized Krylov moment `⟨n^m⟩` of the generating state: the series
/// weighted by `n^m`, divided by the plain overlap.
pub fn overlap_moment(profile: &LanczosProfile, w: f64, m: u32, tol: f64) -> Result<f64> {
    if m == 0 {
        // Normalization; guard the domain errors all the same.
        let _ = overlap(profile, w, tol)?;
        return Ok(1.0);
    }
    let base = overlap(profile, w, tol)?;
    if w == 0.0 {
        return Ok(0.0);
    }
    let natural_len = profile.tabulated_len();
    let ln_w = w.ln();
    let mut weighted = LogSum::new();
    let mut ln_term = 0.0_f64;
    let mut prev_weighted = f64::NEG_INFINITY;
    let mut n = 0usize;
    loop {
        if let Some(len) = natural_len {
            if n >= len {
                break;
            }
        }
        n += 1;
        if n > MAX_TERMS {
            return Err(Error::NoConvergence {
                iterations: MAX_TERMS,
                partial: (weighted.ln_value() - base.ln_value).exp(),
            });
        }
        let b = profile.eval_b(n).unwrap_or_else(|_| {
            profile.chain_couplings(n + 1).map(|c| c[n - 1]).unwrap_or(f64::NAN)
        });
        if b == 0.0 {
            break;
        }
        ln_term += ln_w + 2.0 * b.ln() - 2.0 * (n as f64).ln();
        let ln_weighted_term = ln_term + m as f64 * (n as f64).ln();
        weighted.add(ln_weighted_term);
        let tail = (ln_weighted_term - weighted.ln_value()).exp();
        if tail < tol && ln_weighted_term < prev_weighted && n as f64 > w {
            break;
        }
        prev_weighted = ln_weighted_term;
    }
    Ok((weighted.ln_value() - base.ln_value).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn w_zero_keeps_only_first_term() {
        let p = LanczosProfile::su11(1.0, 0.7).unwrap();
        let s = overlap(&p, 0.0, 1e-12).unwrap();
        assert_eq!(s.value, 1.0);
        assert_eq!(s.truncation_n, 0);
    }

    #[test]
    fn sqrt_hopping_collapses_to_exponential() {
        // Π b_m² = g^{2n} n!, so the series is Σ (g²w)ⁿ/n! = e^{g²w}.
        let p = LanczosProfile::sqrt_hopping(1.0).unwrap();
        let s = overlap(&p, 2.0, 1e-14).unwrap();
        assert_relative_eq!(s.value, 2.0_f64.exp(), max_relative = 1e-12);
        for w in [0.5, 5.0, 20.0] {
            let s = overlap(&p, w, 1e-14).unwrap();
            assert_relative_eq!(s.value, w.exp(), max_relative = 1e-10);
        }
        let g2 = LanczosProfile::sqrt_hopping(2.0).unwrap();
        let s = overlap(&g2, 3.0, 1e-14).unwrap();
        assert_relative_eq!(s.ln_value, 12.0, max_relative = 1e-10);
    }

    #[test]
    fn finite_chain_terminates_exactly() {
        let p = LanczosProfile::tabulated(vec![2.0]).unwrap();
        let s = overlap(&p, 1.0, 1e-12).unwrap();
        assert_relative_eq!(s.value, 5.0, epsilon = 1e-12);
        assert_eq!(s.truncation_n, 1);
        assert_eq!(s.tail_estimate, 0.0);
    }

    #[test]
    fn partial_sums_are_non_decreasing() {
        let p = LanczosProfile::su11(1.0, 0.5).unwrap();
        let s = overlap(&p, 0.3, 1e-13).unwrap();
        for w in s.partial_sums.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(s.tail_estimate < 1e-13);
    }

    #[test]
    fn moments_of_poisson_weights() {
        // sqrt hopping with g = 1 gives Poisson(w) weights: mean w,
        // second moment w + w².
        let p = LanczosProfile::sqrt_hopping(1.0).unwrap();
        assert_relative_eq!(overlap_moment(&p, 3.0, 1, 1e-14).unwrap(), 3.0, max_relative = 1e-9);
        assert_relative_eq!(overlap_moment(&p, 3.0, 2, 1e-14).unwrap(), 12.0, max_relative = 1e-9);
        assert_eq!(overlap_moment(&p, 3.0, 0, 1e-14).unwrap(), 1.0);
    }

    #[test]
    fn moment_matches_log_derivative() {
        // ⟨n⟩ = w d/dw ln (z̄|z).
        let p = LanczosProfile::su11(0.9, 0.6).unwrap();
        let w = 0.4;
        let h = 1e-5 * w;
        let m1 = overlap_moment(&p, w, 1, 1e-13).unwrap();
        let lo = overlap(&p, w - h, 1e-13).unwrap().ln_value;
        let hi = overlap(&p, w + h, 1e-13).unwrap().ln_value;
        let fd = w * (hi - lo) / (2.0 * h);
        assert_relative_eq!(m1, fd, max_relative = 1e-5);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = LanczosProfile::sqrt_hopping(1.0).unwrap();
        assert!(overlap(&p, -1.0, 1e-10).is_err());
        assert!(overlap(&p, 1.0, 0.0).is_err());
    }

    #[test]
    fn divergent_series_reports_partial() {
        // Superlinear b_n = n^{3/2}: term ratio ~ w n grows without bound.
        let p = LanczosProfile::power_law(1.0, 1.5).unwrap();
        match overlap(&p, 1.0, 1e-10) {
            Err(crate::Error::NoConvergence { iterations, partial }) => {
                assert_eq!(iterations, MAX_TERMS);
                assert!(partial.is_infinite() || partial > 0.0);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn marginal_profile_uses_chain_convention() {
        // The marginal family is singular at n = 1; the overlap series must
        // use the extrapolated b(1) rather than erroring.
        let p = LanczosProfile::marginal(1.0, 0.3).unwrap();
        let s = overlap(&p, 0.1, 1e-12).unwrap();
        assert!(s.value > 1.0 && s.value.is_finite());
    }
}
