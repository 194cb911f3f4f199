// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{exp_neg_i, HermitianMatrix, LinalgError, UnitaryMatrix};
use crate::lapack;

/// The generator behind every seeded draw in the crate. ChaCha output is
/// specified bit-for-bit, so samples do not depend on the platform.
pub type SeededRng = ChaCha20Rng;

/// 64-bit seed for a reproducible random stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RandomSeed(pub u64);

impl RandomSeed {
    pub fn rng(self) -> SeededRng {
        ChaCha20Rng::seed_from_u64(self.0)
    }

    /// An independent seed for sub-stream `stream`, e.g. a retry counter.
    pub fn derive(self, stream: u64) -> RandomSeed {
        RandomSeed(splitmix64(
            self.0 ^ splitmix64(stream.wrapping_add(0x6a09_e667_f3bc_c909)),
        ))
    }

    pub fn offset(self, k: u64) -> RandomSeed {
        RandomSeed(self.0.wrapping_add(k))
    }
}

impl From<u64> for RandomSeed {
    fn from(v: u64) -> Self {
        RandomSeed(v)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Two independent standard normals via Box–Muller.
pub(crate) fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // random::<f64>() is in [0, 1); shift u1 into (0, 1] so ln(u1) is finite.
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (r * c, r * s)
}

/// Uniform draw in the open interval (0, 1).
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = rng.random::<f64>();
        if u > 0.0 {
            return u;
        }
    }
}

/// Cauchy(0, γ) draw by inverse CDF.
pub(crate) fn cauchy<R: Rng + ?Sized>(rng: &mut R, gamma: f64) -> f64 {
    gamma * (PI * (open_unit(rng) - 0.5)).tan()
}

/// Haar-distributed `N x N` unitary: QR of a complex Ginibre matrix with the
/// phases of `diag(R)` folded back into `Q`.
pub fn haar_unitary(n: usize, seed: RandomSeed) -> Result<UnitaryMatrix, LinalgError> {
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    let mut rng = seed.rng();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = Array2::from_shape_simple_fn((n, n), || {
        let (re, im) = box_muller(&mut rng);
        Complex64::new(re * scale, im * scale)
    });
    let (mut q, r_diag) = lapack::complex_qr(&z)?;
    let phases: Vec<Complex64> = r_diag
        .iter()
        .map(|r| {
            if r.norm() > 0.0 {
                r / r.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    for mut row in q.rows_mut() {
        for (x, p) in row.iter_mut().zip(&phases) {
            *x *= p;
        }
    }
    Ok(UnitaryMatrix::from_trusted(q))
}

/// Hermitian matrix `B = (A + A†)/2` where the real and imaginary part of
/// every entry of `A` is an independent Cauchy(0, γ) draw.
pub fn cauchy_generator(
    n: usize,
    gamma: f64,
    seed: RandomSeed,
) -> Result<HermitianMatrix, LinalgError> {
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(LinalgError::InvalidArgument(format!(
            "Cauchy scale must be positive, got {gamma}"
        )));
    }
    let mut rng = seed.rng();
    let a = Array2::from_shape_simple_fn((n, n), || {
        let re = cauchy(&mut rng, gamma);
        let im = cauchy(&mut rng, gamma);
        Complex64::new(re, im)
    });
    HermitianMatrix::hermitize(a)
}

/// Cauchy-random unitary `exp(−iB)` with `B` from [`cauchy_generator`].
pub fn cauchy_unitary(
    n: usize,
    gamma: f64,
    seed: RandomSeed,
) -> Result<UnitaryMatrix, LinalgError> {
    exp_neg_i(&cauchy_generator(n, gamma, seed)?)
}

/// Random Hermitian matrix `V diag(λ) V†` with Haar `V` and eigenvalues
/// uniform in `(−radius, radius)`. Used to build generators with a known
/// spectral radius.
pub fn random_hermitian(n: usize, radius: f64, seed: RandomSeed) -> HermitianMatrix {
    let v = haar_unitary(n, seed.derive(0)).expect("n >= 1");
    let mut rng = seed.derive(1).rng();
    let lambdas: Vec<f64> = (0..n)
        .map(|_| radius * (2.0 * open_unit(&mut rng) - 1.0))
        .collect();
    let mut vd = v.as_array().clone();
    for mut row in vd.rows_mut() {
        for (x, l) in row.iter_mut().zip(&lambdas) {
            *x *= *l;
        }
    }
    let g = vd.dot(&v.adjoint().into_array());
    HermitianMatrix::hermitize(g).expect("finite by construction")
}
