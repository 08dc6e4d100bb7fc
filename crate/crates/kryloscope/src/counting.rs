//! Full counting statistics of the Krylov position.
//!
//! The characteristic function `Z(χ,t) = ⟨e^{iχ n̂(t)}⟩` is evaluated by
//! direct summation over the spread distribution and, independently, by the
//! two-branch phase construction (a counting field `±χ/2` inserted on the
//! forward and backward evolution); the two must agree to machine
//! precision, which is part of the regression suite.
//!
//! `Z` values are normalized by the numerical state norm, so `Z(0,t) = 1`
//! holds exactly and `|Z| ≤ 1` always. Moments and cumulants, by contrast,
//! are taken from the raw distribution, making `κ₁` identical to the
//! trajectory complexity and `κ₂` identical to its variance by
//! construction.
//!
//! Large deviations use real tilting `e^{sn}` (the analytic continuation
//! `χ → -is`): the scaled cumulant generating function
//! `λ(s) = (1/t) ln Σ_n P(n,t) e^{sn}` is computed in the log domain and
//! its Legendre–Fenchel transform samples the rate function `Φ(v)`.

use crate::chain::ChainTrajectory;
use crate::fit::fit_line;
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// Highest cumulant order supported by the moment recursion.
pub const MAX_CUMULANT: usize = 6;

/// `|Z|` below which the complex logarithm is considered unreliable.
pub const PHASE_FLAG_TOL: f64 = 1e-10;

/// Counting-statistics data derived from one chain trajectory.
#[derive(Debug, Clone)]
pub struct CountingReport {
    chi_grid: Vec<f64>,
    times: Vec<f64>,
    /// `z[ti][ci]` = Z(χ_ci, t_ti), normalized.
    z: Vec<Vec<Complex64>>,
    /// Raw moments `⟨n^m⟩`, m = 1..=MAX_CUMULANT, per time.
    moments: Vec<[f64; MAX_CUMULANT]>,
    /// Cumulants `κ_m`, m = 1..=MAX_CUMULANT, per time.
    cumulants: Vec<[f64; MAX_CUMULANT]>,
    /// Optional real-tilting data attached by [`rate_function`].
    pub tilted_rate: Option<RateFunctionSamples>,
}

impl CountingReport {
    pub fn chi_grid(&self) -> &[f64] {
        &self.chi_grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn z(&self, ti: usize, ci: usize) -> Complex64 {
        self.z[ti][ci]
    }

    pub fn z_row(&self, ti: usize) -> &[Complex64] {
        &self.z[ti]
    }

    /// Cumulants `κ_1..κ_m` at report time `ti`.
    pub fn cumulants(&self, ti: usize, m: usize) -> Result<Vec<f64>> {
        if m == 0 || m > MAX_CUMULANT {
            return Err(Error::Domain(format!(
                "cumulant order must be in 1..={MAX_CUMULANT}, got {m}"
            )));
        }
        Ok(self.cumulants[ti][..m].to_vec())
    }

    pub fn moment(&self, ti: usize, m: usize) -> Result<f64> {
        if m == 0 || m > MAX_CUMULANT {
            return Err(Error::Domain(format!(
                "moment order must be in 1..={MAX_CUMULANT}, got {m}"
            )));
        }
        Ok(self.moments[ti][m - 1])
    }
}

/// Evaluate `Z(χ,t)` over the trajectory's reporting grid.
///
/// Every `χ` must lie in `(-π, π]`; `Z` is 2π-periodic, so this loses no
/// information.
pub fn counting_function(traj: &ChainTrajectory, chi_grid: &[f64]) -> Result<CountingReport> {
    if chi_grid.is_empty() {
        return Err(Error::Validation("empty chi grid".into()));
    }
    for &chi in chi_grid {
        if !(chi > -std::f64::consts::PI - 1e-12 && chi <= std::f64::consts::PI + 1e-12) {
            return Err(Error::Validation(format!("chi = {chi} outside (-pi, pi]")));
        }
    }
    let times = traj.times().to_vec();
    let rows: Vec<(Vec<Complex64>, [f64; MAX_CUMULANT])> = (0..times.len())
        .into_par_iter()
        .map(|ti| {
            let p = traj.distribution(ti);
            let norm: f64 = p.iter().sum();
            let z_row: Vec<Complex64> =
                chi_grid.iter().map(|&chi| z_from_distribution(&p, chi) / norm).collect();
            let mut mu = [0.0; MAX_CUMULANT];
            for (n, &pn) in p.iter().enumerate() {
                let nf = n as f64;
                let mut pow = nf;
                for m in mu.iter_mut() {
                    *m += pow * pn;
                    pow *= nf;
                }
            }
            (z_row, mu)
        })
        .collect();

    let mut z = Vec::with_capacity(times.len());
    let mut moments = Vec::with_capacity(times.len());
    let mut cumulants = Vec::with_capacity(times.len());
    for (z_row, mu) in rows {
        z.push(z_row);
        cumulants.push(cumulants_from_moments(&mu));
        moments.push(mu);
    }
    Ok(CountingReport {
        chi_grid: chi_grid.to_vec(),
        times,
        z,
        moments,
        cumulants,
        tilted_rate: None,
    })
}

/// `Σ_n P(n) e^{iχn}` by direct summation with a phase recurrence.
pub fn z_from_distribution(p: &[f64], chi: f64) -> Complex64 {
    let rot = Complex64::new(0.0, chi).exp();
    let mut phase = Complex64::ONE;
    let mut acc = Complex64::ZERO;
    for &pn in p {
        acc += phase * pn;
        phase *= rot;
    }
    acc
}

/// The two-branch construction: phases `e^{∓iχ/2 n̂}` applied separately to
/// the forward and backward copies of the state, then contracted. Equal to
/// [`z_from_distribution`] up to roundoff; kept as an independent route.
pub fn z_two_branch(traj: &ChainTrajectory, ti: usize, chi: f64) -> Complex64 {
    let amps = traj.amplitudes(ti);
    let rot = Complex64::new(0.0, chi / 2.0).exp();
    let mut phase = Complex64::ONE; // e^{+i (χ/2) n}
    let mut acc = Complex64::ZERO;
    let mut norm = 0.0;
    for z in amps {
        let forward = phase * z;
        let backward = phase.conj() * z;
        acc += backward.conj() * forward;
        norm += z.norm_sqr();
        phase *= rot;
    }
    acc / norm
}

/// Exact moment → cumulant recursion:
/// `κ_m = μ_m - Σ_{j=1}^{m-1} C(m-1, j-1) κ_j μ_{m-j}`.
fn cumulants_from_moments(mu: &[f64; MAX_CUMULANT]) -> [f64; MAX_CUMULANT] {
    let mut kappa = [0.0; MAX_CUMULANT];
    for m in 1..=MAX_CUMULANT {
        let mut k = mu[m - 1];
        for j in 1..m {
            k -= binomial(m - 1, j - 1) * kappa[j - 1] * mu[m - j - 1];
        }
        kappa[m - 1] = k;
    }
    kappa
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Finite-time free-energy samples `ψ_t(χ) = ln Z(χ,t) / t` at one `χ`.
#[derive(Debug, Clone, Serialize)]
pub struct FreeEnergyTrend {
    pub chi: f64,
    /// Times `t > 0` the samples refer to.
    pub times: Vec<f64>,
    /// Phase-unwrapped `ln Z / t` (real, imaginary).
    pub psi_re: Vec<f64>,
    pub psi_im: Vec<f64>,
    /// Samples where `|Z|` fell below [`PHASE_FLAG_TOL`].
    pub flagged: Vec<bool>,
    /// Mean of `ψ_t` over the fit window.
    pub window_mean: (f64, f64),
    /// Least-squares slope of `ψ_t` over the fit window. A drift that does
    /// not vanish signals that `ln Z` is not linear in `t` at this `χ`; no
    /// convergence claim is made.
    pub window_drift: (f64, f64),
}

/// Estimate `Ψ(χ) = lim (1/t) ln Z` at `chi_grid[ci]`, with the drift over
/// the final window reported so non-convergence is visible.
pub fn free_energy_estimate(report: &CountingReport, ci: usize) -> Result<FreeEnergyTrend> {
    if ci >= report.chi_grid.len() {
        return Err(Error::Validation(format!("chi index {ci} out of range")));
    }
    let mut times = Vec::new();
    let mut psi_re = Vec::new();
    let mut psi_im = Vec::new();
    let mut flagged = Vec::new();
    let mut theta_prev = 0.0;
    for (ti, &t) in report.times.iter().enumerate() {
        let z = report.z[ti][ci];
        if ti == 0 {
            // t = 0 carries Z = 1; it seeds the phase track only.
            theta_prev = z.arg();
            continue;
        }
        let principal = z.arg();
        let two_pi = std::f64::consts::TAU;
        let theta = principal + two_pi * ((theta_prev - principal) / two_pi).round();
        theta_prev = theta;
        times.push(t);
        psi_re.push(z.norm().ln() / t);
        psi_im.push(theta / t);
        flagged.push(z.norm() < PHASE_FLAG_TOL);
    }
    if times.len() < 3 {
        return Err(Error::Validation(
            "free-energy estimate needs >= 3 positive report times".into(),
        ));
    }
    let w = (times.len() / 3).max(3).min(times.len());
    let lo = times.len() - w;
    let mean_re = psi_re[lo..].iter().sum::<f64>() / w as f64;
    let mean_im = psi_im[lo..].iter().sum::<f64>() / w as f64;
    let drift_re = fit_line(&times[lo..], &psi_re[lo..])?.slope;
    let drift_im = fit_line(&times[lo..], &psi_im[lo..])?.slope;
    Ok(FreeEnergyTrend {
        chi: report.chi_grid[ci],
        times,
        psi_re,
        psi_im,
        flagged,
        window_mean: (mean_re, mean_im),
        window_drift: (drift_re, drift_im),
    })
}

/// Real-tilting data: scaled CGF and rate-function samples at one time.
#[derive(Debug, Clone, Serialize)]
pub struct RateFunctionSamples {
    pub t: f64,
    pub s_grid: Vec<f64>,
    /// `λ(s) = (1/t) ln Σ_n P(n) e^{sn}`.
    pub scaled_cgf: Vec<f64>,
    pub v_grid: Vec<f64>,
    /// `Φ(v) = sup_s [s v - λ(s)]`.
    pub rate: Vec<f64>,
}

/// Sample the large-deviation rate function of `P(n, t_ti)` by real tilting
/// over `s_grid`. When `v_grid` is `None`, the velocities are sampled
/// uniformly over the achievable slope range `[λ'(s_min), λ'(s_max)]`.
pub fn rate_function(
    traj: &ChainTrajectory,
    ti: usize,
    s_grid: &[f64],
    v_grid: Option<&[f64]>,
) -> Result<RateFunctionSamples> {
    let t = traj.times()[ti];
    if t <= 0.0 {
        return Err(Error::Domain("rate function needs t > 0".into()));
    }
    if s_grid.len() < 2 || s_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation(
            "s grid must be strictly increasing with >= 2 points".into(),
        ));
    }
    let p = traj.distribution(ti);
    let norm: f64 = p.iter().sum();
    let ln_p: Vec<(f64, f64)> = p
        .iter()
        .enumerate()
        .filter(|(_, &pn)| pn > 0.0)
        .map(|(n, &pn)| (n as f64, (pn / norm).ln()))
        .collect();
    let scaled_cgf: Vec<f64> = s_grid
        .iter()
        .map(|&s| {
            // log-sum-exp over s·n + ln P(n); overflow-free by construction.
            let mut max = f64::NEG_INFINITY;
            for &(n, lp) in &ln_p {
                max = max.max(s * n + lp);
            }
            let sum: f64 = ln_p.iter().map(|&(n, lp)| (s * n + lp - max).exp()).sum();
            (max + sum.ln()) / t
        })
        .collect();

    let v_grid: Vec<f64> = match v_grid {
        Some(v) => v.to_vec(),
        None => {
            let slopes: Vec<f64> = s_grid
                .windows(2)
                .zip(scaled_cgf.windows(2))
                .map(|(s, l)| (l[1] - l[0]) / (s[1] - s[0]))
                .collect();
            let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo + 1e-12) {
                vec![lo]
            } else {
                let m = (2 * s_grid.len()).max(16);
                (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
            }
        }
    };
    let rate = legendre_fenchel(s_grid, &scaled_cgf, &v_grid);
    Ok(RateFunctionSamples { t, s_grid: s_grid.to_vec(), scaled_cgf, v_grid, rate })
}

/// Discrete Legendre–Fenchel transform `g(v) = sup_s [s v - f(s)]` over the
/// sampled grid.
pub fn legendre_fenchel(s: &[f64], f: &[f64], v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&vj| {
            s.iter()
                .zip(f)
                .map(|(&si, &fi)| si * vj - fi)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{evolve_chain, EvolveConfig};
    use crate::models::ClosedFormModel;
    use crate::profile::LanczosProfile;
    use approx::assert_relative_eq;

    fn grid(t_max: f64, steps: usize) -> Vec<f64> {
        (0..=steps).map(|i| t_max * i as f64 / steps as f64).collect()
    }

    fn chi_grid(m: usize) -> Vec<f64> {
        use std::f64::consts::PI;
        (1..=m).map(|i| -PI + 2.0 * PI * i as f64 / m as f64).collect()
    }

    #[test]
    fn z_at_zero_is_exactly_one() {
        let p = LanczosProfile::sqrt_hopping(1.0).unwrap();
        let traj = evolve_chain(&p, &grid(1.0, 4), &EvolveConfig::default()).unwrap();
        let report = counting_function(&traj, &[0.0, 1.0]).unwrap();
        for ti in 0..traj.times().len() {
            assert_eq!(report.z(ti, 0), Complex64::ONE);
            assert!(report.z(ti, 1).norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn poisson_z_at_pi() {
        let p = LanczosProfile::sqrt_hopping(1.0).unwrap();
        let traj = evolve_chain(&p, &grid(1.0, 4), &EvolveConfig::default()).unwrap();
        let report = counting_function(&traj, &[std::f64::consts::PI]).unwrap();
        let z = report.z(4, 0);
        assert_relative_eq!(z.re, (-2.0_f64).exp(), epsilon = 1e-8);
        assert!(z.im.abs() < 1e-8);
    }

    #[test]
    fn su11_z_at_pi_half_k() {
        let p = LanczosProfile::su11(1.0, 0.5).unwrap();
        let traj = evolve_chain(&p, &grid(1.0, 4), &EvolveConfig::default()).unwrap();
        let report = counting_function(&traj, &[std::f64::consts::PI]).unwrap();
        let q = 1.0_f64.tanh().powi(2);
        assert_relative_eq!(report.z(4, 0).re, (1.0 - q) / (1.0 + q), epsilon = 1e-8);
    }

    #[test]
    fn two_branch_identity_is_machine_precision() {
        let p = LanczosProfile::su11(1.0, 1.0).unwrap();
        let traj = evolve_chain(&p, &grid(2.0, 8), &EvolveConfig::default()).unwrap();
        let chis = chi_grid(32);
        let report = counting_function(&traj, &chis).unwrap();
        for ti in [0, 4, 8] {
            for (ci, &chi) in chis.iter().enumerate() {
                let direct = report.z(ti, ci);
                let branch = z_two_branch(&traj, ti, chi);
                assert!((direct - branch).norm() < 1e-12, "ti={ti} chi={chi}");
            }
        }
    }

    #[test]
    fn poisson_cumulants_all_equal_mean() {
        let p = LanczosProfile::sqrt_hopping(1.0).unwrap();
        let traj = evolve_chain(&p, &grid(2.0, 8), &EvolveConfig::default()).unwrap();
        let report = counting_function(&traj, &[0.5]).unwrap();
        let kappa = report.cumulants(8, 4).unwrap();
        for (m, k) in kappa.iter().enumerate() {
            // Higher cumulants amplify integrator and truncation error.
            let tol = 1e-6 * 100f64.powi(m as i32 / 2 + 1);
            assert_relative_eq!(*k, 4.0, max_relative = tol);
        }
        assert!(report.cumulants(8, 7).is_err());
        // t = 0: deterministic initial state.
        let k0 = report.cumulants(0, 3).unwrap();
        assert!(k0.iter().all(|k| k.abs() < 1e-14));
    }

    #[test]
    fn su11_first_cumulant() {
        let p = LanczosProfile::su11(1.0, 1.0).unwrap();
        let traj = evolve_chain(&p, &grid(1.0, 4), &EvolveConfig::default()).unwrap();
        let report = counting_function(&traj, &[0.1]).unwrap();
        let kappa = report.cumulants(4, 2).unwrap();
        assert_relative_eq!(kappa[0], 2.0 * 1.0_f64.sinh().powi(2), max_relative = 1e-6);
        // κ₁ and κ₂ coincide with complexity and variance by construction.
        assert_eq!(kappa[0], traj.complexity_at(4));
        assert_eq!(kappa[1], traj.variance(4));
    }

    #[test]
    fn closed_form_z_match_on_grid() {
        let model = ClosedFormModel::su11(1.0, 0.5).unwrap();
        let p = LanczosProfile::su11(1.0, 0.5).unwrap();
        let traj = evolve_chain(&p, &grid(2.0, 8), &EvolveConfig::default()).unwrap();
        let chis = chi_grid(64);
        let report = counting_function(&traj, &chis).unwrap();
        for ti in 0..traj.times().len() {
            for (ci, &chi) in chis.iter().enumerate() {
                let want = model.exact_z(chi, traj.times()[ti]);
                assert!(
                    (report.z(ti, ci) - want).norm() < 1e-6,
                    "Z mismatch at t={} chi={chi}",
                    traj.times()[ti]
                );
            }
        }
    }

    #[test]
    fn free_energy_zero_at_chi_zero() {
        let p = LanczosProfile::sqrt_hopping(1.0).unwrap();
        let traj = evolve_chain(&p, &grid(2.0, 10), &EvolveConfig::default()).unwrap();
        let report = counting_function(&traj, &[0.0]).unwrap();
        let trend = free_energy_estimate(&report, 0).unwrap();
        for (re, im) in trend.psi_re.iter().zip(&trend.psi_im) {
            assert!(re.abs() < 1e-12 && im.abs() < 1e-12);
        }
        assert!(trend.window_drift.0.abs() < 1e-12);
    }

    #[test]
    fn free_energy_drift_separates_growth_speeds() {
        // Sub-exponential growth (b = √n): at small χ the finite-time drift
        // of ψ_t is O(χ). Exponential growth (su(1,1)): the drift is large
        // and does not vanish, signalling that no Ψ(χ) limit exists at
        // speed t.
        let chi = 0.01;
        let slow = LanczosProfile::power_law(1.0, 0.5).unwrap();
        let traj = evolve_chain(&slow, &grid(3.0, 15), &EvolveConfig::default()).unwrap();
        let report = counting_function(&traj, &[chi]).unwrap();
        let trend = free_energy_estimate(&report, 0).unwrap();
        let slow_drift = (trend.window_drift.0.powi(2) + trend.window_drift.1.powi(2)).sqrt();
        assert!(slow_drift < 0.05, "sub-exponential drift {slow_drift}");

        let fast = LanczosProfile::su11(1.0, 1.0).unwrap();
        let traj = evolve_chain(&fast, &grid(3.0, 15), &EvolveConfig::default()).unwrap();
        let report = counting_function(&traj, &[chi]).unwrap();
        let trend = free_energy_estimate(&report, 0).unwrap();
        let fast_drift = (trend.window_drift.0.powi(2) + trend.window_drift.1.powi(2)).sqrt();
        assert!(
            fast_drift > 20.0 * slow_drift,
            "exponential drift {fast_drift} vs sub-exponential {slow_drift}"
        );
    }

    #[test]
    fn poisson_rate_function() {
        // At t = 1, g = 1: λ(s) = e^s - 1 and Φ(v) = v ln v - v + 1.
        let p = LanczosProfile::sqrt_hopping(1.0).unwrap();
        let traj = evolve_chain(&p, &grid(1.0, 2), &EvolveConfig::default()).unwrap();
        let s: Vec<f64> = (0..61).map(|i| -2.0 + 4.0 * i as f64 / 60.0).collect();
        let samples = rate_function(&traj, 2, &s, None).unwrap();
        for (si, l) in samples.s_grid.iter().zip(&samples.scaled_cgf) {
            assert_relative_eq!(*l, si.exp() - 1.0, epsilon = 2e-6);
        }
        assert!(samples.scaled_cgf[30].abs() < 1e-9); // λ(0) = 0
        for (v, phi) in samples.v_grid.iter().zip(&samples.rate) {
            if *v > 0.2 && *v < 5.0 {
                let exact = v * v.ln() - v + 1.0;
                assert!((phi - exact).abs() < 5e-3, "Φ({v}) = {phi}, want {exact}");
            }
        }
        // Φ is convex on the sampled grid and vanishes at v = κ₁/t.
        for w in samples.rate.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] > -1e-9);
        }
        let min = samples.rate.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min.abs() < 1e-3);
    }

    #[test]
    fn degenerate_distribution_rate() {
        // Two-site chain at t = π/4: P is a point mass at n = 1.
        let p = LanczosProfile::tabulated(vec![2.0]).unwrap();
        let times = [0.0, std::f64::consts::FRAC_PI_4];
        let traj = evolve_chain(&p, &times, &EvolveConfig::default()).unwrap();
        let s: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        let samples = rate_function(&traj, 1, &s, None).unwrap();
        assert_eq!(samples.v_grid.len(), 1);
        let v = samples.v_grid[0];
        assert_relative_eq!(v, 1.0 / times[1], max_relative = 1e-6);
        assert!(samples.rate[0].abs() < 1e-9);
    }

    #[test]
    fn legendre_double_transform_recovers_convex_function() {
        // f(s) = s²/2 is self-conjugate.
        let s: Vec<f64> = (0..201).map(|i| -5.0 + 0.05 * i as f64).collect();
        let f: Vec<f64> = s.iter().map(|v| v * v / 2.0).collect();
        let v: Vec<f64> = (0..81).map(|i| -2.0 + 0.05 * i as f64).collect();
        let g = legendre_fenchel(&s, &f, &v);
        let back = legendre_fenchel(&v, &g, &s);
        for (si, (fi, bi)) in s.iter().zip(f.iter().zip(&back)) {
            if si.abs() < 1.9 {
                assert!((fi - bi).abs() < 2e-3, "double transform at s={si}: {bi} vs {fi}");
            }
        }
    }

    #[test]
    fn rejects_chi_outside_principal_range() {
        let p = LanczosProfile::sqrt_hopping(1.0).unwrap();
        let traj = evolve_chain(&p, &[0.0, 0.5], &EvolveConfig::default()).unwrap();
        assert!(counting_function(&traj, &[4.0]).is_err());
    }
}
