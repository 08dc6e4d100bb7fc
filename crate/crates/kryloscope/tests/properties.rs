//! Property-based invariants.

mod common;

use common::eigen_propagate;
use kryloscope::chain::{evolve_chain, propagate, EvolveConfig};
use kryloscope::counting::{counting_function, legendre_fenchel, z_two_branch};
use kryloscope::fluctuations::{covariance_evolution, NoiseKernel};
use kryloscope::profile::{
    lanczos_tridiagonalize, tridiagonal_from_profile, LanczosProfile, ReorthPolicy,
};
use kryloscope::semiclassics::{integrate_hamilton, HamiltonConfig};
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;

fn coupling_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05_f64..4.0, 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Profile CSV round-trips bit-exactly at 17 significant digits.
    #[test]
    fn profile_csv_round_trip(values in coupling_vec()) {
        let profile = LanczosProfile::tabulated(values.clone()).unwrap();
        let mut buf = Vec::new();
        profile.write_csv(&mut buf).unwrap();
        let back = LanczosProfile::read_csv(buf.as_slice()).unwrap();
        for (n, want) in values.iter().enumerate() {
            prop_assert_eq!(back.eval_b(n + 1).unwrap(), *want);
        }
    }

    /// Lanczos of the tridiagonal matrix built from a profile returns the
    /// profile (round-trip identity).
    #[test]
    fn lanczos_round_trip(values in prop::collection::vec(0.1_f64..4.0, 1..10)) {
        let m = tridiagonal_from_profile(&values, None);
        let dim = values.len() + 1;
        let seed = DVector::from_fn(dim, |i, _| if i == 0 { Complex64::ONE } else { Complex64::ZERO });
        let dec = lanczos_tridiagonalize(&m, &seed, dim, ReorthPolicy::Full).unwrap();
        prop_assert_eq!(dec.couplings.len(), values.len());
        for (got, want) in dec.couplings.iter().zip(&values) {
            prop_assert!((got - want).abs() < 1e-10);
        }
    }

    /// Analytic derivatives agree with central finite differences of the
    /// continuous extension at step 1e-4 for every family.
    #[test]
    fn derivative_consistency(
        g in 0.2_f64..4.0,
        k in 0.1_f64..2.5,
        gamma in 0.0_f64..5.0,
        eps in -0.4_f64..0.8,
        n_star in 2.0_f64..500.0,
        x in 2.5_f64..800.0,
    ) {
        let profiles = [
            LanczosProfile::sqrt_hopping(g).unwrap(),
            LanczosProfile::su11(g, k).unwrap(),
            LanczosProfile::linear_shift(g, gamma).unwrap(),
            LanczosProfile::log_drift(g, gamma).unwrap(),
            LanczosProfile::marginal(g, eps.max(-0.3)).unwrap(),
            LanczosProfile::power_law(g, (k / 2.5).clamp(0.05, 0.95)).unwrap(),
            LanczosProfile::crossover(g, gamma, n_star).unwrap(),
        ];
        let h = 1e-4;
        for p in &profiles {
            let fd = (p.b_cont(x + h) - p.b_cont(x - h)) / (2.0 * h);
            let an = p.b_prime_cont(x);
            let scale = an.abs().max(1e-6);
            prop_assert!((an - fd).abs() / scale < 1e-6,
                "{:?} at {x}: analytic {an} fd {fd}", p.kind());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Unitarity, positivity, hard wall, time reversal, and the two-route
    /// counting identity hold on arbitrary finite chains.
    #[test]
    fn chain_invariants(values in prop::collection::vec(0.1_f64..3.0, 2..10), t_max in 0.3_f64..2.5) {
        let profile = LanczosProfile::tabulated(values.clone()).unwrap();
        let times: Vec<f64> = (0..=6).map(|i| t_max * i as f64 / 6.0).collect();
        let traj = evolve_chain(&profile, &times, &EvolveConfig::default()).unwrap();

        for ti in 0..times.len() {
            let p = traj.distribution(ti);
            // Positivity and normalization.
            for &pn in &p {
                prop_assert!(pn >= -1e-14);
            }
            prop_assert!(traj.norm_drift()[ti] < 1e-9);
            prop_assert!(traj.complexity_at(ti) >= 0.0);
            prop_assert!(traj.variance(ti) >= 0.0);
        }

        // Two-route counting identity.
        let chis = [-2.0, -0.7, 0.4, 3.1];
        let report = counting_function(&traj, &chis).unwrap();
        for (ci, &chi) in chis.iter().enumerate() {
            let d = (report.z(6, ci) - z_two_branch(&traj, 6, chi)).norm();
            prop_assert!(d < 1e-12);
        }

        // Time reversal back to the origin state.
        let couplings = profile.chain_couplings(values.len() + 1).unwrap();
        let last = traj.amplitudes(times.len() - 1).to_vec();
        let back = propagate(&couplings, &[], &last, &[0.0, t_max], 1e-12, true).unwrap();
        let fin = back.last().unwrap();
        prop_assert!((fin[0] - Complex64::ONE).norm() < 1e-8);
        for z in &fin[1..] {
            prop_assert!(z.norm() < 1e-8);
        }

        // Consistency with the eigen oracle at the final time.
        let reference = eigen_propagate(&couplings, None, &times);
        for (n, want) in reference.last().unwrap().iter().enumerate() {
            prop_assert!((traj.amplitudes(times.len() - 1)[n] - want).norm() < 1e-8);
        }
    }

    /// Semiclassical energy conservation and manifold pinning across
    /// families and initial conditions.
    #[test]
    fn hamilton_flow_invariants(
        alpha in 0.3_f64..2.0,
        shift in 0.0_f64..3.0,
        n0 in 1.0_f64..20.0,
        p0 in -3.0_f64..3.0,
    ) {
        let profile = LanczosProfile::linear_shift(alpha, shift).unwrap();
        let times: Vec<f64> = (0..=20).map(|i| 1.5 * i as f64 / 20.0).collect();
        let cfg = HamiltonConfig { step_tol: 1e-12, ..HamiltonConfig::default() };
        let traj = integrate_hamilton(&profile, n0, p0, &times, &cfg).unwrap();
        prop_assert!(traj.energy_drift() < 1e-7);
        for &n in traj.n_path() {
            prop_assert!(n >= 0.0);
        }
        // Wrapped momentum stays in its principal interval.
        for &p in traj.p_path() {
            prop_assert!(p > -std::f64::consts::PI - 1e-12 && p <= std::f64::consts::PI + 1e-12);
        }
    }

    /// Covariance stays positive semidefinite along arbitrary saddles.
    #[test]
    fn covariance_psd(
        alpha in 0.3_f64..1.5,
        k in 0.2_f64..1.5,
        p0 in -2.0_f64..2.0,
        d_nn in 0.0_f64..2.0,
        d_pp in 0.0_f64..2.0,
    ) {
        let profile = LanczosProfile::su11(alpha, k).unwrap();
        let times: Vec<f64> = (0..=15).map(|i| 1.2 * i as f64 / 15.0).collect();
        let saddle = integrate_hamilton(&profile, 2.0, p0, &times, &HamiltonConfig::default()).unwrap();
        let noise = NoiseKernel::new(d_nn, 0.0, d_pp).unwrap();
        let report = covariance_evolution(&profile, &saddle, &noise).unwrap();
        for c in &report.covariance {
            let tr = c[0] + c[2];
            let det = c[0] * c[2] - c[1] * c[1];
            let disc = ((c[0] - c[2]).powi(2) + 4.0 * c[1] * c[1]).max(0.0).sqrt();
            let l_min = (tr - disc) / 2.0;
            prop_assert!(l_min >= -1e-12, "eigenvalue {l_min}, det {det}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The double Legendre–Fenchel transform is dominated by the original
    /// convex function and matches it inside the sampled slope range.
    #[test]
    fn legendre_fenchel_involution(a in 0.2_f64..3.0, b in -1.0_f64..1.0) {
        // f(s) = a s²/2 + b s is convex; f** = f.
        let s: Vec<f64> = (0..121).map(|i| -3.0 + 0.05 * i as f64).collect();
        let f: Vec<f64> = s.iter().map(|&si| a * si * si / 2.0 + b * si).collect();
        let v: Vec<f64> = (0..81).map(|i| {
            let lo = a * -2.0 + b;
            let hi = a * 2.0 + b;
            lo + (hi - lo) * i as f64 / 80.0
        }).collect();
        let g = legendre_fenchel(&s, &f, &v);
        let back = legendre_fenchel(&v, &g, &s);
        for (i, &si) in s.iter().enumerate() {
            prop_assert!(back[i] <= f[i] + 1e-9);
            if si.abs() < 1.9 {
                prop_assert!((back[i] - f[i]).abs() < 0.02 * (1.0 + f[i].abs()));
            }
        }
    }
}
