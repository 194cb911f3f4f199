// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;

use super::{adjoint, HermitianMatrix, LinalgError, UnitaryMatrix};
use crate::lapack;

/// Eigenphases closer than this to `±π` are treated as lying on the
/// negative real axis.
pub const BRANCH_CUT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LogOptions {
    /// Map eigenvalues at `−1` to generator eigenvalue `+π` instead of failing.
    pub clamp_negative_real: bool,
}

/// Hermitian generator `G = i·log(U)` of the principal logarithm, so that
/// `U = exp(−iG)` and every eigenvalue of `G` lies in `(−π, π]`.
pub fn principal_log_unitary(u: &UnitaryMatrix) -> Result<HermitianMatrix, LinalgError> {
    principal_log_unitary_with(u, LogOptions::default())
}

pub fn principal_log_unitary_with(
    u: &UnitaryMatrix,
    options: LogOptions,
) -> Result<HermitianMatrix, LinalgError> {
    // U is normal, so its Schur form is diagonal up to rounding and the Schur
    // vectors form an orthonormal eigenbasis even inside near-degenerate clusters.
    let (q, t_diag) = lapack::complex_schur(u.as_array())?;
    let mut gen_eigs = Vec::with_capacity(t_diag.len());
    for lambda in &t_diag {
        let phase = lambda.im.atan2(lambda.re);
        if PI - phase.abs() <= BRANCH_CUT_TOL {
            if options.clamp_negative_real {
                gen_eigs.push(PI);
                continue;
            }
            return Err(LinalgError::NegativeRealEigenvalue {
                eigenvalue: *lambda,
            });
        }
        // log λ = i·phase, so the generator eigenvalue is i·(i·phase) = −phase.
        gen_eigs.push(-phase);
    }
    let g = reassemble(&q, gen_eigs.iter().map(|&x| Complex64::new(x, 0.0)));
    HermitianMatrix::hermitize(g)
}

/// Eigenphases of `U` in `(−π, π]`, unsorted.
pub fn eigenphases(u: &UnitaryMatrix) -> Result<Vec<f64>, LinalgError> {
    let (_, t_diag) = lapack::complex_schur(u.as_array())?;
    Ok(t_diag.iter().map(|l| l.im.atan2(l.re)).collect())
}

/// `exp(−iG)` for Hermitian `G`, via its eigendecomposition.
pub fn exp_neg_i(g: &HermitianMatrix) -> Result<UnitaryMatrix, LinalgError> {
    let (w, v) = lapack::hermitian_eigen(g.as_array())?;
    let u = reassemble(&v, w.iter().map(|&x| Complex64::from_polar(1.0, -x)));
    Ok(UnitaryMatrix::from_trusted(u))
}

/// `U^n` by binary exponentiation of dense products. No re-orthonormalization
/// is applied; callers that care about drift can check `unitarity_defect`.
pub fn matrix_power(u: &UnitaryMatrix, n: u64) -> Result<UnitaryMatrix, LinalgError> {
    if n == 0 {
        return Err(LinalgError::InvalidArgument(
            "matrix_power requires n >= 1".into(),
        ));
    }
    let mut base = u.as_array().clone();
    let mut acc: Option<Array2<Complex64>> = None;
    let mut k = n;
    loop {
        if k & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => a.dot(&base),
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = base.dot(&base);
    }
    Ok(UnitaryMatrix::from_trusted(
        acc.expect("n >= 1 sets at least one bit"),
    ))
}

/// `V diag(d) V†`.
fn reassemble(v: &Array2<Complex64>, d: impl Iterator<Item = Complex64>) -> Array2<Complex64> {
    let d: Vec<Complex64> = d.collect();
    let mut vd = v.clone();
    for mut row in vd.rows_mut() {
        for (x, s) in row.iter_mut().zip(&d) {
            *x *= s;
        }
    }
    vd.dot(&adjoint(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_unitary, random_hermitian, RandomSeed};
    use num_complex::Complex64 as C;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn log_of_identity_is_zero() {
        for n in [1, 2, 5] {
            let g = principal_log_unitary(&UnitaryMatrix::identity(n)).unwrap();
            assert!(g.max_abs() < 1e-14);
        }
    }

    #[test]
    fn log_of_diagonal_phases() {
        let u = UnitaryMatrix::from_diagonal(&[
            C::from_polar(1.0, -PI / 2.0),
            C::from_polar(1.0, PI / 2.0),
        ])
        .unwrap();
        let g = principal_log_unitary(&u).unwrap();
        let a = g.as_array();
        assert!((a[[0, 0]] - c(PI / 2.0, 0.0)).norm() < 1e-14);
        assert!((a[[1, 1]] - c(-PI / 2.0, 0.0)).norm() < 1e-14);
        assert!(a[[0, 1]].norm() < 1e-14);
    }

    #[test]
    fn negative_real_eigenvalue_is_rejected() {
        let u = UnitaryMatrix::from_diagonal(&[c(-1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let err = principal_log_unitary(&u).unwrap_err();
        assert!(matches!(err, LinalgError::NegativeRealEigenvalue { .. }));

        let g = principal_log_unitary_with(
            &u,
            LogOptions {
                clamp_negative_real: true,
            },
        )
        .unwrap();
        assert!((g.as_array()[[0, 0]] - c(PI, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn non_unitary_input_is_rejected() {
        let m = Array2::from_shape_vec(
            (2, 2),
            vec![c(1.0, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        assert!(matches!(
            UnitaryMatrix::new(m),
            Err(LinalgError::NonUnitaryInput { .. })
        ));
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let u = exp_neg_i(&HermitianMatrix::zeros(4)).unwrap();
        assert!(u.max_abs_diff(&UnitaryMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn exp_of_half_pi_sigma_x() {
        let sx = Array2::from_shape_vec(
            (2, 2),
            vec![c(0.0, 0.0), c(PI / 2.0, 0.0), c(PI / 2.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let u = exp_neg_i(&HermitianMatrix::new(sx).unwrap()).unwrap();
        let expected = Array2::from_shape_vec(
            (2, 2),
            vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, -1.0), c(0.0, 0.0)],
        )
        .unwrap();
        assert!(crate::linalg::max_abs_diff(u.as_array(), &expected) < 1e-14);
    }

    #[test]
    fn exp_of_diagonal_is_elementwise() {
        let d = [0.3, -1.2, 2.9];
        let mut g = Array2::zeros((3, 3));
        for (i, x) in d.iter().enumerate() {
            g[[i, i]] = c(*x, 0.0);
        }
        let u = exp_neg_i(&HermitianMatrix::new(g).unwrap()).unwrap();
        for (i, x) in d.iter().enumerate() {
            assert!((u.as_array()[[i, i]] - C::from_polar(1.0, -x)).norm() < 1e-14);
        }
    }

    #[test]
    fn log_exp_round_trip_recovers_generator() {
        for (n, seed) in [(2, 1u64), (16, 2), (64, 3)] {
            let g0 = random_hermitian(n, PI - 0.1, RandomSeed(seed));
            let u = exp_neg_i(&g0).unwrap();
            assert!(u.unitarity_defect() < 1e-10);
            let g = principal_log_unitary(&u).unwrap();
            assert!(g.max_abs_diff(&g0) < 1e-8, "n={n}: {}", g.max_abs_diff(&g0));
        }
    }

    #[test]
    fn log_reproduces_unitary_and_spectrum_is_principal() {
        let u = haar_unitary(32, RandomSeed(11)).unwrap();
        let g = principal_log_unitary(&u).unwrap();
        let back = exp_neg_i(&g).unwrap();
        assert!(back.max_abs_diff(&u) < 1e-9);
        let (w, _) = lapack::hermitian_eigen(g.as_array()).unwrap();
        assert!(w.iter().all(|&x| x > -PI - 1e-9 && x <= PI + 1e-9));
    }

    #[test]
    fn power_one_and_fourth_roots() {
        let u = haar_unitary(8, RandomSeed(5)).unwrap();
        assert_eq!(matrix_power(&u, 1).unwrap(), u);

        let d = UnitaryMatrix::from_diagonal(&[c(0.0, 1.0), c(0.0, -1.0)]).unwrap();
        let p = matrix_power(&d, 4).unwrap();
        assert!(p.max_abs_diff(&UnitaryMatrix::identity(2)) < 1e-15);
        assert!(matrix_power(&d, 0).is_err());
    }

    #[test]
    fn power_matches_spectral_power() {
        let u = haar_unitary(24, RandomSeed(9)).unwrap();
        let p = matrix_power(&u, 7).unwrap();
        // Independent route: U^7 = Q diag(λ^7) Q† from the Schur form.
        let (q, t) = lapack::complex_schur(u.as_array()).unwrap();
        let spectral = reassemble(&q, t.iter().map(|l| l.powu(7)));
        assert!(crate::linalg::max_abs_diff(p.as_array(), &spectral) < 1e-9);
    }

    #[test]
    fn power_stays_unitary() {
        let u = haar_unitary(32, RandomSeed(21)).unwrap();
        let p = matrix_power(&u, 1000).unwrap();
        assert!(p.unitarity_defect() < 1e-9);
    }
}
