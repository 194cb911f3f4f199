// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex linear algebra: checked matrix wrappers, spectral functions
//! of unitary and Hermitian matrices, and random-unitary samplers.

pub(crate) mod random;
mod spectral;

use std::fmt;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use thiserror::Error;

pub use random::{
    cauchy_generator, cauchy_unitary, haar_unitary, random_hermitian, RandomSeed, SeededRng,
};
pub use spectral::{
    eigenphases, exp_neg_i, matrix_power, principal_log_unitary, principal_log_unitary_with,
    LogOptions, BRANCH_CUT_TOL,
};

/// Tolerance for `‖U†U − I‖_max` when wrapping a matrix as unitary.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance for `‖G − G†‖_max` when wrapping a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has zero dimension")]
    Empty,
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("matrix is not unitary: max |U^H U - I| = {defect:e}")]
    NonUnitaryInput { defect: f64 },
    #[error("matrix is not Hermitian: max |G - G^H| = {defect:e}")]
    NonHermitianInput { defect: f64 },
    #[error(
        "eigenvalue {eigenvalue} lies on the negative real axis; principal logarithm undefined"
    )]
    NegativeRealEigenvalue { eigenvalue: Complex64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
}

/// A dense `N x N` complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct SquareComplexMatrix(Array2<Complex64>);

impl SquareComplexMatrix {
    pub fn new(entries: Array2<Complex64>) -> Result<Self, LinalgError> {
        let (rows, cols) = entries.dim();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(LinalgError::Empty);
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self(entries))
    }

    pub(crate) fn from_trusted(entries: Array2<Complex64>) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        Self(entries)
    }

    pub fn identity(dim: usize) -> Self {
        Self(Array2::eye(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(Array2::zeros((dim, dim)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_array(&self) -> &Array2<Complex64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<Complex64> {
        self.0
    }

    pub fn adjoint(&self) -> Array2<Complex64> {
        adjoint(&self.0)
    }

    /// Largest elementwise modulus difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs_diff(&self.0, &other.0)
    }
}

impl fmt::Debug for SquareComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim() <= 8 {
            write!(f, "SquareComplexMatrix({:?})", self.0)
        } else {
            write!(f, "SquareComplexMatrix(dim = {})", self.dim())
        }
    }
}

/// A square matrix with `‖U†U − I‖_max ≤ 1e-10` at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(SquareComplexMatrix);

impl UnitaryMatrix {
    pub fn new(entries: Array2<Complex64>) -> Result<Self, LinalgError> {
        let m = SquareComplexMatrix::new(entries)?;
        let defect = unitarity_defect(m.as_array());
        if defect > UNITARY_TOL {
            return Err(LinalgError::NonUnitaryInput { defect });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix that is unitary by construction (products, exponentials
    /// of Hermitian matrices, QR factors). Skips the O(N^3) check.
    pub(crate) fn from_trusted(entries: Array2<Complex64>) -> Self {
        Self(SquareComplexMatrix::from_trusted(entries))
    }

    pub fn identity(dim: usize) -> Self {
        Self(SquareComplexMatrix::identity(dim))
    }

    /// Unitary diagonal matrix `diag(phases)`; every entry must have unit modulus.
    pub fn from_diagonal(phases: &[Complex64]) -> Result<Self, LinalgError> {
        let n = phases.len();
        let mut m = Array2::zeros((n, n));
        for (i, z) in phases.iter().enumerate() {
            m[[i, i]] = *z;
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_array(&self) -> &Array2<Complex64> {
        self.0.as_array()
    }

    pub fn into_array(self) -> Array2<Complex64> {
        self.0.into_array()
    }

    pub fn as_square(&self) -> &SquareComplexMatrix {
        &self.0
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        Self::from_trusted(self.0.adjoint())
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(self.as_array())
    }

    pub fn max_abs_diff(&self, other: &UnitaryMatrix) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    /// Product `self · other`.
    pub fn mul(&self, other: &UnitaryMatrix) -> Result<UnitaryMatrix, LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(Self::from_trusted(self.as_array().dot(other.as_array())))
    }
}

/// A square matrix with `‖G − G†‖_max ≤ 1e-12` at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(SquareComplexMatrix);

impl HermitianMatrix {
    pub fn new(entries: Array2<Complex64>) -> Result<Self, LinalgError> {
        let m = SquareComplexMatrix::new(entries)?;
        let defect = hermiticity_defect(m.as_array());
        if defect > HERMITIAN_TOL {
            return Err(LinalgError::NonHermitianInput { defect });
        }
        Ok(Self(m))
    }

    /// Replaces `m` by `(m + m†)/2`, which is exactly Hermitian.
    pub fn hermitize(m: Array2<Complex64>) -> Result<Self, LinalgError> {
        let m = SquareComplexMatrix::new(m)?;
        Ok(Self(SquareComplexMatrix::from_trusted(hermitian_part(
            m.as_array(),
        ))))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(SquareComplexMatrix::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_array(&self) -> &Array2<Complex64> {
        self.0.as_array()
    }

    pub fn into_array(self) -> Array2<Complex64> {
        self.0.into_array()
    }

    pub fn as_square(&self) -> &SquareComplexMatrix {
        &self.0
    }

    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    /// Largest modulus entry.
    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

pub(crate) fn adjoint(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

pub(crate) fn hermitian_part(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| (a[[i, j]] + a[[j, i]].conj()) * 0.5)
}

pub(crate) fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    let mut m = 0.0f64;
    Zip::from(a)
        .and(b)
        .for_each(|x, y| m = m.max((x - y).norm()));
    m
}

/// `‖A†A − I‖_max`.
pub fn unitarity_defect(a: &Array2<Complex64>) -> f64 {
    let prod = adjoint(a).dot(a);
    prod.indexed_iter()
        .map(|((i, j), z)| {
            let target = if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            (z - target).norm()
        })
        .fold(0.0, f64::max)
}

/// `‖A − A†‖_max`.
pub fn hermiticity_defect(a: &Array2<Complex64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for i in 0..n {
        for j in i..n {
            m = m.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    m
}
