//! Independent oracles shared by the integration-test suites. Everything
//! here deliberately avoids the library's own evolution and summation
//! paths.
#![allow(dead_code)] // each test binary uses a different subset

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Propagate `ψ(t) = e^{-iHt} ψ(0)` by dense eigendecomposition of the
/// real-symmetric tridiagonal chain Hamiltonian (couplings `b_1..`,
/// optional diagonal `a_n`).
pub fn eigen_propagate(
    couplings: &[f64],
    diagonal: Option<&[f64]>,
    times: &[f64],
) -> Vec<Vec<Complex64>> {
    let n = couplings.len() + 1;
    let mut h = DMatrix::<f64>::zeros(n, n);
    for (i, &b) in couplings.iter().enumerate() {
        h[(i, i + 1)] = b;
        h[(i + 1, i)] = b;
    }
    if let Some(a) = diagonal {
        for (i, &v) in a.iter().enumerate().take(n) {
            h[(i, i)] = v;
        }
    }
    let eig = h.symmetric_eigen();
    // ψ0 = e_0 in the eigenbasis.
    let coeffs: Vec<f64> = (0..n).map(|j| eig.eigenvectors[(0, j)]).collect();
    times
        .iter()
        .map(|&t| {
            (0..n)
                .map(|site| {
                    let mut amp = Complex64::ZERO;
                    for (j, &c) in coeffs.iter().enumerate() {
                        let phase = Complex64::new(0.0, -eig.eigenvalues[j] * t).exp();
                        amp += phase * c * eig.eigenvectors[(site, j)];
                    }
                    amp
                })
                .collect()
        })
        .collect()
}

/// Lanczos coefficients from Hankel determinants of the moment sequence
/// `μ_k = ⟨seed| M^k |seed⟩` — the classic orthogonal-polynomial route,
/// independent of any Gram–Schmidt recursion.
///
/// Returns `(a_0..a_{m-1}, b_1..b_{m-1})`.
pub fn moment_method_coefficients(
    matrix: &DMatrix<Complex64>,
    seed: &DVector<Complex64>,
    m: usize,
) -> (Vec<f64>, Vec<f64>) {
    let n_moments = 2 * m + 1;
    let mut moments = Vec::with_capacity(n_moments + 1);
    let mut v = seed.clone();
    let norm = v.norm();
    v /= Complex64::new(norm, 0.0);
    let seed_unit = v.clone();
    moments.push(1.0);
    for _ in 0..n_moments {
        v = matrix * &v;
        moments.push(seed_unit.dotc(&v).re);
    }

    let hankel = |rows: usize, shifted: bool| -> f64 {
        if rows == 0 {
            return 1.0;
        }
        let mut h = DMatrix::<f64>::zeros(rows, rows);
        for i in 0..rows {
            for j in 0..rows {
                let col = if shifted && j == rows - 1 { j + 1 } else { j };
                h[(i, j)] = moments[i + col];
            }
        }
        h.determinant()
    };

    let delta: Vec<f64> = (0..=m + 1).map(|k| hankel(k, false)).collect();
    let delta_shift: Vec<f64> = (0..=m + 1).map(|k| hankel(k, true)).collect();

    let mut a = Vec::with_capacity(m);
    for i in 0..m {
        // a_i = Δ'_{i+1}/Δ_{i+1} - Δ'_i/Δ_i with Δ'_0/Δ_0 = 0.
        let prev = if i == 0 { 0.0 } else { delta_shift[i] / delta[i] };
        a.push(delta_shift[i + 1] / delta[i + 1] - prev);
    }
    let mut b = Vec::with_capacity(m.saturating_sub(1));
    for i in 1..m {
        let b_sq = delta[i + 1] * delta[i - 1] / (delta[i] * delta[i]);
        b.push(b_sq.max(0.0).sqrt());
    }
    (a, b)
}

/// `⟨K₀| e^{√w L₋} e^{√w L₊} |K₀⟩` for the finite chain with the given
/// couplings, via dense nilpotent matrix exponentials. Equals
/// `‖e^{√w L₊} e₀‖²`.
pub fn dense_overlap(couplings: &[f64], w: f64) -> f64 {
    let n = couplings.len() + 1;
    let mut l_plus = DMatrix::<f64>::zeros(n, n);
    for (i, &b) in couplings.iter().enumerate() {
        l_plus[(i + 1, i)] = b;
    }
    let z = w.sqrt();
    let mut term = DVector::<f64>::zeros(n);
    term[0] = 1.0;
    let mut u = term.clone();
    for k in 1..n {
        term = (&l_plus * &term) * (z / k as f64);
        u += &term;
    }
    u.norm_squared()
}

/// Deterministic pseudo-random stream for test fixtures.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}
