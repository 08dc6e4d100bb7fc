//! Semiclassical dynamics in Krylov phase space.
//!
//! The effective Hamiltonian `H_eff(n,p) = 2 b(n) cos p` generates the flow
//!
//! ```text
//! dn/dt = ∂H/∂p = -2 b(n)  sin p
//! dp/dt = -∂H/∂n = -2 b'(n) cos p
//! ```
//!
//! The vertical lines `p = ±π/2` are fixed in `p`; motion there is purely
//! radial with rate `2 b'(n)`, growing on the `p = -π/2` branch (repels in
//! `n`, contracts in `δp`) and decaying on `p = +π/2`. For linear profiles
//! `b = α n` the growth rate is the Lyapunov exponent `2α` and trajectories
//! conserve `n cos p`.
//!
//! [`classify_growth`] fits sampled `b(n)` data against the four deformation
//! families of the linear fixed point and reports the implied growth law:
//! constant shifts and logarithmic additions leave the exponential rate
//! `2α` unchanged, a `1 + ε/ln n` slope correction dresses it by `t^ε`, and
//! sublinear `b ~ n^γ` replaces it with polynomial growth `t^{1/(1-γ)}`.

use crate::fit::{fit_line, fit_two_basis, LineFit};
use crate::ode::{integrate_observed, OdeOptions};
use crate::profile::{LanczosProfile, SmoothProfile};
use crate::{Error, Result};
use serde::Serialize;

/// `H_eff` and its gradient `(∂H/∂n, ∂H/∂p)` at a phase-space point.
pub fn h_eff(profile: &LanczosProfile, n: f64, p: f64) -> (f64, (f64, f64)) {
    let smooth = profile.smooth();
    h_eff_smooth(&smooth, n, p)
}

fn h_eff_smooth(smooth: &SmoothProfile<'_>, n: f64, p: f64) -> (f64, (f64, f64)) {
    let b = smooth.b(n);
    let bp = smooth.b_prime(n);
    (2.0 * b * p.cos(), (2.0 * bp * p.cos(), -2.0 * b * p.sin()))
}

/// Integration parameters for the Hamilton flow.
#[derive(Debug, Clone, Copy)]
pub struct HamiltonConfig {
    pub step_tol: f64,
    /// Flow is frozen and the trajectory truncated below this `n`; guards
    /// the `b'` singularities of sublinear families near the origin.
    pub n_floor: f64,
    /// Flow is frozen and the trajectory truncated above this `n`; guards
    /// overflow on exponentially growing branches when only the early part
    /// of the path is needed.
    pub n_ceiling: f64,
}

impl Default for HamiltonConfig {
    fn default() -> Self {
        Self { step_tol: 1e-10, n_floor: 0.5, n_ceiling: f64::INFINITY }
    }
}

/// A semiclassical `(n(t), p(t))` path with conservation diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseTrajectory {
    times: Vec<f64>,
    n_path: Vec<f64>,
    /// Momentum wrapped to `(-π, π]`.
    p_path: Vec<f64>,
    /// Continuously unwrapped momentum.
    p_unwrapped: Vec<f64>,
    /// `H_eff` along the path.
    conserved_h: Vec<f64>,
    /// `(rate, stderr)` from the default late-window fit of `ln n(t)`,
    /// when the window is in a growing regime.
    lyapunov_fit: Option<(f64, f64)>,
    /// True when the path reached the `n` floor and was truncated.
    truncated: bool,
}

impl PhaseTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_path(&self) -> &[f64] {
        &self.n_path
    }

    pub fn p_path(&self) -> &[f64] {
        &self.p_path
    }

    pub fn p_unwrapped(&self) -> &[f64] {
        &self.p_unwrapped
    }

    pub fn conserved_h(&self) -> &[f64] {
        &self.conserved_h
    }

    pub fn lyapunov_fit(&self) -> Option<(f64, f64)> {
        self.lyapunov_fit
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn is_valid(&self) -> bool {
        !self.truncated
    }

    /// Largest relative drift of `H_eff` from its initial value.
    pub fn energy_drift(&self) -> f64 {
        let h0 = self.conserved_h[0];
        let scale = h0.abs().max(1.0);
        self.conserved_h
            .iter()
            .map(|h| (h - h0).abs() / scale)
            .fold(0.0, f64::max)
    }
}

fn wrap_angle(p: f64) -> f64 {
    let w = (p + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    if w == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        w
    }
}

/// Integrate Hamilton's equations from `(n0, p0)` over the reporting grid.
///
/// The flow freezes once `n` drops to the floor; the trajectory is then
/// reported as truncated rather than silently continued.
pub fn integrate_hamilton(
    profile: &LanczosProfile,
    n0: f64,
    p0: f64,
    times: &[f64],
    config: &HamiltonConfig,
) -> Result<PhaseTrajectory> {
    if !(n0 >= 1.0) {
        return Err(Error::Domain(format!("initial position must satisfy n0 >= 1, got {n0}")));
    }
    if times.is_empty() || times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation("time grid must start at 0 and increase strictly".into()));
    }
    let smooth = profile.smooth();
    let floor = config.n_floor;
    let ceiling = config.n_ceiling;
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (n, p) = (y[0], y[1]);
        if n <= floor || n >= ceiling {
            dy[0] = 0.0;
            dy[1] = 0.0;
            return;
        }
        dy[0] = -2.0 * smooth.b(n) * p.sin();
        dy[1] = -2.0 * smooth.b_prime(n) * p.cos();
    };

    let mut n_path = Vec::with_capacity(times.len());
    let mut p_unwrapped = Vec::with_capacity(times.len());
    integrate_observed(&rhs, &[n0, p0], times, OdeOptions::with_tol(config.step_tol), |_, _, y| {
        n_path.push(y[0]);
        p_unwrapped.push(y[1]);
        Ok(())
    })?;

    // Truncate at the first report time at or beyond either guard.
    let cut = n_path.iter().position(|&n| n <= floor + 1e-12 || n >= ceiling);
    let truncated = cut.is_some();
    let keep = cut.map_or(times.len(), |i| i + 1);
    let times_kept: Vec<f64> = times[..keep].to_vec();
    n_path.truncate(keep);
    p_unwrapped.truncate(keep);

    let p_path: Vec<f64> = p_unwrapped.iter().map(|&p| wrap_angle(p)).collect();
    let conserved_h: Vec<f64> = n_path
        .iter()
        .zip(&p_unwrapped)
        .map(|(&n, &p)| 2.0 * smooth.b(n.max(floor)) * p.cos())
        .collect();

    let mut traj = PhaseTrajectory {
        times: times_kept,
        n_path,
        p_path,
        p_unwrapped,
        conserved_h,
        lyapunov_fit: None,
        truncated,
    };
    traj.lyapunov_fit = default_lyapunov_window(&traj)
        .and_then(|w| lyapunov_rate(&traj, Some(w)).ok());
    Ok(traj)
}

fn default_lyapunov_window(traj: &PhaseTrajectory) -> Option<(f64, f64)> {
    let times = traj.times();
    if times.len() < 4 {
        return None;
    }
    let t_end = *times.last().unwrap();
    let t_lo = times[0] + (t_end - times[0]) * 2.0 / 3.0;
    Some((t_lo, t_end))
}

/// Least-squares slope of `ln n(t)` over `[window.0, window.1]` (default:
/// the final third of the grid). Errors when the window covers fewer than
/// three points or `n` is not increasing there.
pub fn lyapunov_rate(traj: &PhaseTrajectory, window: Option<(f64, f64)>) -> Result<(f64, f64)> {
    let window = window
        .or_else(|| default_lyapunov_window(traj))
        .ok_or_else(|| Error::Fit("trajectory too short for a Lyapunov window".into()))?;
    let mut ts = Vec::new();
    let mut ln_n = Vec::new();
    for (&t, &n) in traj.times().iter().zip(traj.n_path()) {
        if t >= window.0 - 1e-12 && t <= window.1 + 1e-12 {
            if n <= 0.0 {
                return Err(Error::Fit(format!("n({t}) = {n} is not positive")));
            }
            ts.push(t);
            ln_n.push(n.ln());
        }
    }
    if ts.len() < 3 {
        return Err(Error::Fit("Lyapunov window covers fewer than 3 samples".into()));
    }
    if ln_n.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Fit("n(t) is not monotonically growing over the window".into()));
    }
    let LineFit { slope, slope_stderr, .. } = fit_line(&ts, &ln_n)?;
    Ok((slope, slope_stderr))
}

/// Growth classes of `b(n)` asymptotics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClassKind {
    IrrelevantLinear,
    IrrelevantLogDrift,
    Marginal,
    RelevantSublinear,
    Undetermined,
}

/// Fitted parameters of the winning class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "class")]
pub enum ClassFit {
    Linear { alpha: f64, gamma: f64 },
    LogDrift { alpha: f64, beta: f64 },
    Marginal { alpha: f64, epsilon: f64 },
    Power { amplitude: f64, gamma_exp: f64 },
}

/// Predicted long-time growth law of `n(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum GrowthLaw {
    /// `n(t) ~ e^{rate·t}`.
    Exponential { rate: f64 },
    /// `n(t) ~ e^{rate·t} t^{power}`.
    ExponentialPowerLog { rate: f64, power: f64 },
    /// `n(t) ~ t^{exponent}`.
    Polynomial { exponent: f64 },
}

/// Classification outcome: winning class, parameters, predicted law, the
/// per-class relative residuals, and the local rate curve `λ_eff = 2 b'`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthClass {
    pub kind: GrowthClassKind,
    pub fit: Option<ClassFit>,
    pub predicted_law: Option<GrowthLaw>,
    /// Relative RMS residual of each candidate fit.
    pub residuals: Vec<(GrowthClassKind, f64)>,
    /// Ranked candidates when the outcome is undetermined.
    pub candidates: Vec<GrowthClassKind>,
    /// `(n, 2 b'(n))` samples over the probe range.
    pub lambda_eff: Vec<(f64, f64)>,
}

/// Residual below which a fit is treated as exact; nested families (a pure
/// linear profile is also a zero-β log drift) are then resolved by
/// preferring the simplest class instead of reporting ambiguity.
const EXACT_RESIDUAL: f64 = 1e-9;
/// Residual ratio under which two genuinely different fits are ambiguous.
const AMBIGUITY_MARGIN: f64 = 1.1;

const PROBE_POINTS: usize = 200;

/// Classify `b(n)` sampled over `[n_min, n_max]` (log-spaced, at least two
/// decades) into the deformation taxonomy of the linear fixed point.
pub fn classify_growth(profile: &LanczosProfile, n_min: f64, n_max: f64) -> Result<GrowthClass> {
    if !(n_min >= 2.0) {
        return Err(Error::Domain(format!("probe range must start at n >= 2, got {n_min}")));
    }
    if !(n_max / n_min >= 100.0) {
        return Err(Error::Domain(format!(
            "probe range must span at least two decades, got [{n_min}, {n_max}]"
        )));
    }
    let smooth = profile.smooth();
    let ns: Vec<f64> = (0..PROBE_POINTS)
        .map(|i| {
            let f = i as f64 / (PROBE_POINTS - 1) as f64;
            n_min * (n_max / n_min).powf(f)
        })
        .collect();
    let bs: Vec<f64> = ns.iter().map(|&n| smooth.b(n)).collect();
    if bs.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::Validation("b(n) must be finite and positive over the probe range".into()));
    }
    let lambda_eff: Vec<(f64, f64)> =
        ns.iter().map(|&n| (n, 2.0 * smooth.b_prime(n))).collect();

    let rel_rms = |fit: &dyn Fn(f64) -> f64| -> f64 {
        let ss: f64 = ns
            .iter()
            .zip(&bs)
            .map(|(&n, &b)| {
                let r = (fit(n) - b) / b;
                r * r
            })
            .sum();
        (ss / ns.len() as f64).sqrt()
    };

    // Linear: b = α n + γ.
    let ones = vec![1.0; ns.len()];
    let (lin_alpha, lin_gamma, _) = fit_two_basis(&ns, &ones, &bs)?;
    let lin_res = rel_rms(&|n| lin_alpha * n + lin_gamma);

    // Log drift: b = α n + β ln n.
    let log_ns: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let (ld_alpha, ld_beta, _) = fit_two_basis(&ns, &log_ns, &bs)?;
    let ld_res = rel_rms(&|n: f64| ld_alpha * n + ld_beta * n.ln());

    // Marginal: b = α n + (αε) n/ln n.
    let n_over_log: Vec<f64> = ns.iter().map(|n| n / n.ln()).collect();
    let (mg_alpha, mg_scaled_eps, _) = fit_two_basis(&ns, &n_over_log, &bs)?;
    let mg_eps = mg_scaled_eps / mg_alpha;
    let mg_res = rel_rms(&|n: f64| mg_alpha * n + mg_scaled_eps * n / n.ln());

    // Power law: ln b = ln A + γ ln n.
    let ln_bs: Vec<f64> = bs.iter().map(|b| b.ln()).collect();
    let pw = fit_line(&log_ns, &ln_bs)?;
    let pw_amplitude = pw.intercept.exp();
    let pw_gamma = pw.slope;
    let pw_res = rel_rms(&|n: f64| pw_amplitude * n.powf(pw_gamma));

    let entries = [
        (GrowthClassKind::IrrelevantLinear, lin_res, lin_alpha > 0.0),
        (GrowthClassKind::IrrelevantLogDrift, ld_res, ld_alpha > 0.0),
        (GrowthClassKind::Marginal, mg_res, mg_alpha > 0.0),
        (
            GrowthClassKind::RelevantSublinear,
            pw_res,
            pw_gamma > 0.0 && pw_gamma < 1.0 && pw_amplitude > 0.0,
        ),
    ];
    let residuals: Vec<(GrowthClassKind, f64)> =
        entries.iter().map(|&(k, r, _)| (k, r)).collect();

    let details = |kind: GrowthClassKind| -> (ClassFit, GrowthLaw) {
        match kind {
            GrowthClassKind::IrrelevantLinear => (
                ClassFit::Linear { alpha: lin_alpha, gamma: lin_gamma },
                GrowthLaw::Exponential { rate: 2.0 * lin_alpha },
            ),
            GrowthClassKind::IrrelevantLogDrift => (
                ClassFit::LogDrift { alpha: ld_alpha, beta: ld_beta },
                GrowthLaw::Exponential { rate: 2.0 * ld_alpha },
            ),
            GrowthClassKind::Marginal => (
                ClassFit::Marginal { alpha: mg_alpha, epsilon: mg_eps },
                GrowthLaw::ExponentialPowerLog { rate: 2.0 * mg_alpha, power: mg_eps },
            ),
            GrowthClassKind::RelevantSublinear => (
                ClassFit::Power { amplitude: pw_amplitude, gamma_exp: pw_gamma },
                GrowthLaw::Polynomial { exponent: 1.0 / (1.0 - pw_gamma) },
            ),
            GrowthClassKind::Undetermined => unreachable!(),
        }
    };

    // Exact fits first, resolved by simplicity preference (the declaration
    // order above): a pure linear profile is also an exact zero-parameter
    // log drift and marginal fit.
    let exact: Vec<&(GrowthClassKind, f64, bool)> = entries
        .iter()
        .filter(|(_, r, ok)| *ok && *r < EXACT_RESIDUAL)
        .collect();
    let winner = if let Some(&&(kind, _, _)) = exact.first() {
        Some(kind)
    } else {
        let mut eligible: Vec<&(GrowthClassKind, f64, bool)> =
            entries.iter().filter(|(_, _, ok)| *ok).collect();
        eligible.sort_by(|a, b| a.1.total_cmp(&b.1));
        match eligible.as_slice() {
            [] => None,
            [one] => Some(one.0),
            [best, second, ..] => {
                if second.1 < best.1 * AMBIGUITY_MARGIN {
                    None
                } else {
                    Some(best.0)
                }
            }
        }
    };

    match winner {
        Some(kind) => {
            let (fit, law) = details(kind);
            Ok(GrowthClass {
                kind,
                fit: Some(fit),
                predicted_law: Some(law),
                residuals,
                candidates: vec![],
                lambda_eff,
            })
        }
        None => {
            let mut ranked: Vec<(GrowthClassKind, f64)> = entries
                .iter()
                .filter(|(_, _, ok)| *ok)
                .map(|&(k, r, _)| (k, r))
                .collect();
            ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
            Ok(GrowthClass {
                kind: GrowthClassKind::Undetermined,
                fit: None,
                predicted_law: None,
                residuals,
                candidates: ranked.into_iter().map(|(k, _)| k).collect(),
                lambda_eff,
            })
        }
    }
}
