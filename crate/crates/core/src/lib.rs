// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Quantum extreme reservoir computation (QERC) laboratory.
//!
//! The crate is organised along the data flow of the method:
//!
//! - [`linalg`]: dense complex matrices, the principal logarithm of a
//!   unitary, and the Haar and Cauchy random-unitary samplers.
//! - [`reservoir`]: feature-map unitaries, most importantly the Floquet
//!   operator of a driven Ising chain (a discrete time crystal) and its
//!   stroboscopic powers.
//! - [`netweights`]: the weighted-network view of a unitary, obtained by
//!   expanding `G = i·log U` over the generalized Gell-Mann basis, plus
//!   histograms and Gaussian fits of the resulting weights.
//! - [`dataset`]: MNIST IDX loading, PCA and the product-state encoder.
//! - [`pipeline`]: measurement probabilities, the one-layer softmax network
//!   trained by SGD, and epoch/realization accuracy statistics.

// Links the system OpenBLAS that provides BLAS and LAPACK symbols.
extern crate openblas_src;

pub(crate) mod lapack;

pub mod dataset;
pub mod linalg;
pub mod netweights;
pub mod pipeline;
pub mod reservoir;

pub use linalg::{HermitianMatrix, LinalgError, RandomSeed, SquareComplexMatrix, UnitaryMatrix};
