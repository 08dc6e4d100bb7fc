//! Explicit operator-space problems: build the matrix of the commutator
//! superoperator `A ↦ [H, A]` in an orthonormal operator basis.
//!
//! The operator space carries the inner product `⟨A|B⟩ = Tr(A†B)/𝒩`; the
//! matrix units scaled by `√𝒩` are orthonormal under it, which makes the
//! Liouvillian matrix elements explicit: `M[(i,j),(k,l)] = H_ik δ_jl −
//! δ_ik H_lj`, i.e. `M = H ⊗ I − I ⊗ Hᵀ` in row-major vectorization. For
//! Hermitian `H` this matrix is Hermitian.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Tolerance for the Hermiticity validation of the Hamiltonian.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// A Hamiltonian, a seed operator, and the inner-product normalization.
#[derive(Debug, Clone)]
pub struct OperatorSpaceProblem {
    hamiltonian: DMatrix<Complex64>,
    seed_operator: DMatrix<Complex64>,
    normalization: f64,
}

impl OperatorSpaceProblem {
    /// Validate and build a problem. The normalization defaults to the
    /// Hilbert-space dimension when `None`.
    pub fn new(
        hamiltonian: DMatrix<Complex64>,
        seed_operator: DMatrix<Complex64>,
        normalization: Option<f64>,
    ) -> Result<Self> {
        let d = hamiltonian.nrows();
        if d == 0 || hamiltonian.ncols() != d {
            return Err(Error::Validation("Hamiltonian must be square and non-empty".into()));
        }
        if seed_operator.nrows() != d || seed_operator.ncols() != d {
            return Err(Error::Validation(format!(
                "seed operator is {}x{}, expected {d}x{d}",
                seed_operator.nrows(),
                seed_operator.ncols()
            )));
        }
        let dev = hermiticity_deviation(&hamiltonian);
        if dev > HERMITICITY_TOL {
            return Err(Error::Validation(format!(
                "Hamiltonian is not Hermitian (max |H - H†| = {dev:.3e})"
            )));
        }
        let normalization = normalization.unwrap_or(d as f64);
        if !(normalization > 0.0) {
            return Err(Error::Validation(format!(
                "normalization must be positive, got {normalization}"
            )));
        }
        let hs_norm_sq: f64 = seed_operator.iter().map(|z| z.norm_sqr()).sum();
        if hs_norm_sq == 0.0 {
            return Err(Error::Validation("seed operator has zero Hilbert-Schmidt norm".into()));
        }
        Ok(Self { hamiltonian, seed_operator, normalization })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn hamiltonian(&self) -> &DMatrix<Complex64> {
        &self.hamiltonian
    }

    /// Coefficient vector of the seed operator in the orthonormal
    /// matrix-unit basis, normalized to unit length.
    pub fn seed_vector(&self) -> DVector<Complex64> {
        let d = self.dim();
        let scale = 1.0 / self.normalization.sqrt();
        let mut v = DVector::zeros(d * d);
        for i in 0..d {
            for j in 0..d {
                v[i * d + j] = self.seed_operator[(i, j)] * scale;
            }
        }
        let norm = v.norm();
        v / Complex64::new(norm, 0.0)
    }
}

/// Matrix of `A ↦ [H, A]` in the orthonormal matrix-unit basis; Hermitian
/// for Hermitian `H`, of dimension `d²`.
pub fn build_liouvillian(problem: &OperatorSpaceProblem) -> DMatrix<Complex64> {
    let h = &problem.hamiltonian;
    let d = problem.dim();
    let mut m = DMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let row = i * d + j;
            for k in 0..d {
                // H ⊗ I term: column (k, j).
                m[(row, k * d + j)] += h[(i, k)];
            }
            for l in 0..d {
                // I ⊗ Hᵀ term: column (i, l).
                m[(row, i * d + l)] -= h[(l, j)];
            }
        }
    }
    m
}

pub(crate) fn hermiticity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli_z() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
    }

    fn pauli_x() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
    }

    fn sorted_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
        let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn pauli_z_commutator_spectrum() {
        let problem = OperatorSpaceProblem::new(pauli_z(), pauli_x(), None).unwrap();
        let l = build_liouvillian(&problem);
        assert!(hermiticity_deviation(&l) < 1e-12);
        let ev = sorted_eigenvalues(&l);
        for (got, want) in ev.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_commutes() {
        let id = DMatrix::identity(3, 3);
        let seed = DMatrix::from_fn(3, 3, |i, j| c((i + 2 * j) as f64, 0.0));
        let problem = OperatorSpaceProblem::new(id, seed, None).unwrap();
        let l = build_liouvillian(&problem);
        assert!(l.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn pauli_x_spectrum_matches_pauli_z() {
        let problem = OperatorSpaceProblem::new(pauli_x(), pauli_z(), None).unwrap();
        let ev = sorted_eigenvalues(&build_liouvillian(&problem));
        for (got, want) in ev.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let bad = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
        assert!(OperatorSpaceProblem::new(bad, pauli_x(), None).is_err());
    }

    #[test]
    fn rejects_zero_seed() {
        let zero = DMatrix::zeros(2, 2);
        assert!(OperatorSpaceProblem::new(pauli_z(), zero, None).is_err());
    }

    #[test]
    fn liouvillian_is_hermitian_for_random_h() {
        // Fixed pseudo-random Hermitian H.
        let d = 4;
        let mut a = DMatrix::zeros(d, d);
        let mut s = 0.37_f64;
        for i in 0..d {
            for j in 0..d {
                s = (s * 997.13).fract();
                let re = s - 0.5;
                s = (s * 997.13).fract();
                let im = s - 0.5;
                a[(i, j)] = c(re, im);
            }
        }
        let h = (&a + a.adjoint()) * c(0.5, 0.0);
        let seed = DMatrix::identity(d, d) + &h;
        let problem = OperatorSpaceProblem::new(h, seed, None).unwrap();
        assert!(hermiticity_deviation(&build_liouvillian(&problem)) < 1e-12);
    }
}
