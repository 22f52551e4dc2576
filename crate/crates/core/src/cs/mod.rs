//! Classical sparse recovery of a spectrum from compressed measurements.
//!
//! Both solvers work natively on complex vectors and are deterministic.
//! [`omp`] is greedy (orthogonal matching pursuit); [`fista`] is accelerated
//! proximal gradient on `½‖y − Φx‖² + λ‖x‖₁`.

mod fista;
mod omp;

pub use fista::{fista, objective, soft_threshold, spectral_norm_sq};
pub use omp::omp;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::sensing::{Measurements, SensingMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum CsError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected length {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("non-finite input")]
    NonFinite,
}

/// What ends the solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stopping {
    /// Residual norm `‖y − Φx‖₂ ≤ ε`.
    Epsilon(f64),
    /// Fixed L1 weight.
    Lambda(f64),
    /// L1 weight as a fraction of `‖Φᴴy‖_∞`.
    RelativeLambda(f64),
    /// Number of atoms (greedy solver).
    Sparsity(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsSolverConfig {
    pub stopping: Stopping,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for CsSolverConfig {
    fn default() -> Self {
        CsSolverConfig {
            stopping: Stopping::RelativeLambda(1e-3),
            max_iterations: 500,
            tolerance: 1e-8,
        }
    }
}

impl CsSolverConfig {
    pub fn sparsity(k: usize) -> Self {
        CsSolverConfig {
            stopping: Stopping::Sparsity(k),
            ..Self::default()
        }
    }

    pub fn lambda(lambda: f64) -> Self {
        CsSolverConfig {
            stopping: Stopping::Lambda(lambda),
            ..Self::default()
        }
    }

    pub fn epsilon(epsilon: f64) -> Self {
        CsSolverConfig {
            stopping: Stopping::Epsilon(epsilon),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CsError> {
        if self.max_iterations == 0 {
            return Err(CsError::Config("max_iterations must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(CsError::Config(format!("tolerance must be nonnegative, got {}", self.tolerance)));
        }
        let ok = match self.stopping {
            Stopping::Epsilon(v) | Stopping::Lambda(v) | Stopping::RelativeLambda(v) => v >= 0.0 && v.is_finite(),
            Stopping::Sparsity(k) => k >= 1,
        };
        if !ok {
            return Err(CsError::Config(format!("bad stopping rule {:?}", self.stopping)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsResult {
    pub estimate: Vec<Complex64>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    /// The greedy solver fell back to a minimum-norm solution.
    pub rank_deficient: bool,
    /// Selected atoms (greedy) or nonzero coordinates (proximal), ascending.
    pub support: Vec<usize>,
}

/// Dense double-precision copy of `Φ`.
pub fn dense_matrix(phi: &SensingMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(phi.m(), phi.n_s(), |i, j| phi.entry(i, j))
}

pub(crate) fn check_inputs(a: &DMatrix<Complex64>, y: &[Complex64]) -> Result<DVector<Complex64>, CsError> {
    if y.len() != a.nrows() {
        return Err(CsError::Dimension {
            expected: a.nrows(),
            found: y.len(),
        });
    }
    let finite = |c: &Complex64| c.re.is_finite() && c.im.is_finite();
    if !y.iter().all(finite) || !a.iter().all(finite) {
        return Err(CsError::NonFinite);
    }
    Ok(DVector::from_column_slice(y))
}

pub fn omp_reconstruct(y: &Measurements, phi: &SensingMatrix, config: &CsSolverConfig) -> Result<CsResult, CsError> {
    omp(&dense_matrix(phi), &y.y, config)
}

pub fn fista_reconstruct(y: &Measurements, phi: &SensingMatrix, config: &CsSolverConfig) -> Result<CsResult, CsError> {
    fista(&dense_matrix(phi), &y.y, config)
}
