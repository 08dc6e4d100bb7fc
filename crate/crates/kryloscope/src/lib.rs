//! Numerical library for operator-growth dynamics on the Krylov chain.
//!
//! Heisenberg evolution of an operator, tridiagonalized in its Krylov basis,
//! becomes a hopping problem on the half-line with position-dependent
//! amplitudes `b_n` (the Lanczos coefficients). This crate provides:
//!
//! - [`profile`] — Lanczos-coefficient sequences, analytic families or
//!   tabulated data, plus explicit Liouvillian construction and Lanczos
//!   tridiagonalization for small operator-space problems;
//! - [`chain`] — exact finite-truncation integration of the chain amplitudes
//!   `i dφ_n/dt = b_{n+1} φ_{n+1} + b_n φ_{n-1}` and the observables built
//!   from them (complexity `K(t)`, spread distribution `P(n,t)`, moments);
//! - [`counting`] — full counting statistics of the chain position:
//!   `Z(χ,t) = Σ_n P(n,t) e^{iχn}`, cumulants, finite-time free energy, and
//!   large-deviation rate functions via real tilting;
//! - [`models`] — closed-form reference models (Poisson / square-root
//!   hopping and the su(1,1) family) used as ground truth in the test suite;
//! - [`semiclassics`] — Hamilton flow generated by `H_eff(n,p) = 2 b(n) cos p`
//!   in Krylov phase space, Lyapunov-rate extraction, and classification of
//!   `b(n)` asymptotics into growth classes;
//! - [`fluctuations`] — linearized fluctuations around the semiclassical
//!   saddle: stability matrices, covariance via the Lyapunov differential
//!   equation, Euler–Maruyama cross-checks, and the crossover
//!   susceptibility sweep;
//! - [`overlap`] — generating-state overlap series determined purely by the
//!   Lanczos coefficients, with normalized Krylov moments.
//!
//! All deterministic operations are pure; stochastic ones take an explicit
//! seed. Types are immutable after construction and safe to share across
//! threads.

// Validation sites use negated comparisons (`!(x > 0.0)`) on purpose: the
// negated form rejects NaN, which the suggested `x <= 0.0` lets through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod counting;
mod error;
pub mod fit;
pub mod fluctuations;
pub mod models;
pub mod ode;
pub mod overlap;
pub mod profile;
pub mod semiclassics;

pub use error::{Error, Result};

pub use chain::{ChainTrajectory, EvolveConfig, Truncation};
pub use counting::{CountingReport, FreeEnergyTrend, RateFunctionSamples};
pub use fluctuations::{FluctuationReport, NoiseKernel, SweepConfig, SweepPoint, SweepReport};
pub use models::ClosedFormModel;
pub use overlap::OverlapSeries;
pub use profile::{
    LanczosProfile, OperatorSpaceProblem, ProfileKind, ReorthPolicy, TridiagonalDecomposition,
};
pub use semiclassics::{GrowthClass, GrowthClassKind, GrowthLaw, PhaseTrajectory};
