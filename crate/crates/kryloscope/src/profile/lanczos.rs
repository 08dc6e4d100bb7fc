//! Hermitian Lanczos tridiagonalization with configurable
//! reorthogonalization.

use super::LanczosProfile;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// How aggressively the Krylov basis is kept orthogonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReorthPolicy {
    /// Re-project against all previous basis vectors, twice per step.
    #[default]
    Full,
    /// Re-project once, only when the new vector shows measurable overlap
    /// with the existing basis (threshold √ε).
    Selective,
    /// Plain three-term recurrence.
    None,
}

/// Result of a Lanczos run: couplings, diagonal, and the orthonormal basis.
#[derive(Debug, Clone)]
pub struct TridiagonalDecomposition {
    /// Off-diagonal couplings `b_1 .. b_m`.
    pub couplings: Vec<f64>,
    /// Diagonal coefficients `a_0 .. a_m` (zero for a commutator
    /// Liouvillian with Hermitian seed, recorded regardless).
    pub diagonal: Vec<f64>,
    /// Orthonormal Krylov basis vectors (chain length = couplings + 1).
    pub basis: Vec<DVector<Complex64>>,
    /// Largest observed deviation `|⟨v_i, v_j⟩ - δ_ij|` across the basis.
    pub max_ortho_defect: f64,
    /// Set when the defect exceeded 1e-6 (possible with `ReorthPolicy::None`).
    pub ortho_warning: bool,
}

impl TridiagonalDecomposition {
    /// Chain length (number of Krylov basis vectors).
    pub fn chain_len(&self) -> usize {
        self.basis.len()
    }

    /// Package the couplings as a tabulated profile with the diagonal
    /// recorded.
    pub fn profile(&self) -> Result<LanczosProfile> {
        Ok(LanczosProfile::tabulated(self.couplings.clone())?
            .with_diagonal(self.diagonal.clone()))
    }
}

/// Relative breakdown tolerance: the recursion stops when
/// `b_m < 1e-12 · max(b_1..b_{m-1})` (Krylov space exhausted).
const BREAKDOWN_REL_TOL: f64 = 1e-12;

/// Tridiagonalize a Hermitian matrix from a seed vector.
///
/// The seed is normalized internally; a zero seed is an error. Iteration
/// stops at `n_max` couplings, at the matrix dimension, or at breakdown,
/// whichever comes first.
pub fn lanczos_tridiagonalize(
    matrix: &DMatrix<Complex64>,
    seed: &DVector<Complex64>,
    n_max: usize,
    reorth: ReorthPolicy,
) -> Result<TridiagonalDecomposition> {
    let dim = matrix.nrows();
    if matrix.ncols() != dim || dim == 0 {
        return Err(Error::Validation("Lanczos needs a square non-empty matrix".into()));
    }
    if seed.len() != dim {
        return Err(Error::Validation(format!(
            "seed length {} does not match matrix dimension {dim}",
            seed.len()
        )));
    }
    let seed_norm = seed.norm();
    if seed_norm == 0.0 {
        return Err(Error::Validation("seed vector is zero".into()));
    }
    let n_max = n_max.min(dim.saturating_sub(1));

    let mut basis: Vec<DVector<Complex64>> = vec![seed / Complex64::new(seed_norm, 0.0)];
    let mut couplings: Vec<f64> = Vec::new();
    let mut diagonal: Vec<f64> = Vec::new();
    // Matrix scale for the very first breakdown test.
    let matrix_scale = matrix.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);

    for step in 0..=n_max {
        let v = &basis[step];
        let mut w = matrix * v;
        let a = v.dotc(&w).re;
        diagonal.push(a);
        if step == n_max {
            break;
        }
        w.axpy(Complex64::new(-a, 0.0), v, Complex64::ONE);
        if step > 0 {
            let b_prev = Complex64::new(couplings[step - 1], 0.0);
            w.axpy(-b_prev, &basis[step - 1], Complex64::ONE);
        }
        match reorth {
            ReorthPolicy::Full => {
                for _ in 0..2 {
                    for u in &basis {
                        let overlap = u.dotc(&w);
                        w.axpy(-overlap, u, Complex64::ONE);
                    }
                }
            }
            ReorthPolicy::Selective => {
                let threshold = f64::EPSILON.sqrt() * w.norm().max(1.0);
                for u in &basis {
                    let overlap = u.dotc(&w);
                    if overlap.norm() > threshold {
                        w.axpy(-overlap, u, Complex64::ONE);
                    }
                }
            }
            ReorthPolicy::None => {}
        }
        let b = w.norm();
        let scale = couplings.iter().copied().fold(matrix_scale, f64::max);
        if b < BREAKDOWN_REL_TOL * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        couplings.push(b);
        basis.push(w / Complex64::new(b, 0.0));
    }

    let mut max_defect: f64 = 0.0;
    for i in 0..basis.len() {
        for j in i..basis.len() {
            let overlap = basis[i].dotc(&basis[j]);
            let target = if i == j { 1.0 } else { 0.0 };
            max_defect = max_defect.max((overlap - Complex64::new(target, 0.0)).norm());
        }
    }
    Ok(TridiagonalDecomposition {
        couplings,
        diagonal,
        basis,
        max_ortho_defect: max_defect,
        ortho_warning: max_defect > 1e-6,
    })
}

/// Dense tridiagonal matrix with the given off-diagonal couplings and
/// optional diagonal, as a real matrix promoted to complex entries.
pub fn tridiagonal_from_profile(couplings: &[f64], diagonal: Option<&[f64]>) -> DMatrix<Complex64> {
    let n = couplings.len() + 1;
    let mut m = DMatrix::zeros(n, n);
    for (i, &b) in couplings.iter().enumerate() {
        m[(i, i + 1)] = Complex64::new(b, 0.0);
        m[(i + 1, i)] = Complex64::new(b, 0.0);
    }
    if let Some(a) = diagonal {
        for (i, &v) in a.iter().enumerate().take(n) {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{build_liouvillian, OperatorSpaceProblem};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pauli_z_with_pauli_x_seed_gives_single_coupling() {
        let h = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let sx = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let problem = OperatorSpaceProblem::new(h, sx, None).unwrap();
        let l = build_liouvillian(&problem);
        let seed = problem.seed_vector();
        let dec = lanczos_tridiagonalize(&l, &seed, 16, ReorthPolicy::Full).unwrap();
        assert_eq!(dec.couplings.len(), 1);
        assert_relative_eq!(dec.couplings[0], 2.0, epsilon = 1e-12);
        assert_eq!(dec.chain_len(), 2);
        for a in &dec.diagonal {
            assert!(a.abs() < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_round_trip() {
        let b = [3.0, 1.0, 4.0];
        let m = tridiagonal_from_profile(&b, None);
        let seed = DVector::from_fn(4, |i, _| if i == 0 { Complex64::ONE } else { Complex64::ZERO });
        let dec = lanczos_tridiagonalize(&m, &seed, 8, ReorthPolicy::Full).unwrap();
        assert_eq!(dec.couplings.len(), 3);
        for (got, want) in dec.couplings.iter().zip(b) {
            assert_relative_eq!(*got, want, epsilon = 1e-10);
        }
        assert!(dec.max_ortho_defect < 1e-10);
    }

    #[test]
    fn breakdown_terminates_early() {
        // Zero matrix: Krylov space is one-dimensional.
        let m = DMatrix::zeros(5, 5);
        let seed = DVector::from_element(5, c(0.6, 0.0));
        let dec = lanczos_tridiagonalize(&m, &seed, 5, ReorthPolicy::Full).unwrap();
        assert!(dec.couplings.is_empty());
        assert_eq!(dec.chain_len(), 1);
    }

    #[test]
    fn zero_seed_is_an_error() {
        let m = DMatrix::identity(3, 3);
        let seed = DVector::zeros(3);
        assert!(lanczos_tridiagonalize(&m, &seed, 3, ReorthPolicy::Full).is_err());
    }
}
