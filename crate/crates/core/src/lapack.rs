// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Thin safe wrappers over the handful of LAPACK drivers the crate needs.
//!
//! Matrices cross the FFI boundary in column-major order. `Complex64` is
//! `#[repr(C)] { re, im }`, which is layout-compatible with LAPACK's
//! double-complex type.

use std::os::raw::{c_char, c_int};

use lapack_sys::__BindgenComplex;
use ndarray::{Array2, ShapeBuilder};
use num_complex::Complex64;

use crate::linalg::LinalgError;

type LapackComplex = __BindgenComplex<f64>;

fn to_col_major<T: Clone>(a: &Array2<T>) -> Vec<T> {
    a.t().iter().cloned().collect()
}

fn from_col_major<T: Clone>(n: usize, data: Vec<T>) -> Array2<T> {
    Array2::from_shape_vec((n, n).f(), data)
        .expect("column-major buffer has n*n entries")
        .as_standard_layout()
        .into_owned()
}

fn as_int(n: usize) -> c_int {
    c_int::try_from(n).expect("matrix dimension fits in a LAPACK integer")
}

fn check(routine: &'static str, info: c_int) -> Result<(), LinalgError> {
    if info == 0 {
        Ok(())
    } else {
        Err(LinalgError::Lapack { routine, info })
    }
}

fn cptr(v: &mut [Complex64]) -> *mut LapackComplex {
    v.as_mut_ptr().cast()
}

/// Complex Schur factorization `A = Q T Q^H`; returns `Q` and the diagonal of `T`.
pub(crate) fn complex_schur(
    a: &Array2<Complex64>,
) -> Result<(Array2<Complex64>, Vec<Complex64>), LinalgError> {
    let n = a.nrows();
    let ni = as_int(n);
    let mut buf = to_col_major(a);
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut vs = vec![Complex64::new(0.0, 0.0); n * n];
    let mut rwork = vec![0.0f64; n.max(1)];
    let mut sdim: c_int = 0;
    let mut info: c_int = 0;
    let jobvs = b'V' as c_char;
    let sort = b'N' as c_char;

    let mut query = [Complex64::new(0.0, 0.0)];
    let lwork_query: c_int = -1;
    unsafe {
        lapack_sys::zgees_(
            &jobvs,
            &sort,
            None,
            &ni,
            cptr(&mut buf),
            &ni,
            &mut sdim,
            cptr(&mut w),
            cptr(&mut vs),
            &ni,
            cptr(&mut query),
            &lwork_query,
            rwork.as_mut_ptr(),
            std::ptr::null_mut(),
            &mut info,
        );
    }
    check("zgees", info)?;
    let lwork = (query[0].re as usize).max(2 * n).max(1);
    let mut work = vec![Complex64::new(0.0, 0.0); lwork];
    let lwork = as_int(lwork);
    unsafe {
        lapack_sys::zgees_(
            &jobvs,
            &sort,
            None,
            &ni,
            cptr(&mut buf),
            &ni,
            &mut sdim,
            cptr(&mut w),
            cptr(&mut vs),
            &ni,
            cptr(&mut work),
            &lwork,
            rwork.as_mut_ptr(),
            std::ptr::null_mut(),
            &mut info,
        );
    }
    check("zgees", info)?;
    Ok((from_col_major(n, vs), w))
}

/// Hermitian eigendecomposition (divide and conquer). Eigenvalues ascending,
/// eigenvectors in the columns of the returned matrix.
pub(crate) fn hermitian_eigen(
    a: &Array2<Complex64>,
) -> Result<(Vec<f64>, Array2<Complex64>), LinalgError> {
    let n = a.nrows();
    let ni = as_int(n);
    let mut buf = to_col_major(a);
    let mut w = vec![0.0f64; n];
    let jobz = b'V' as c_char;
    let uplo = b'U' as c_char;
    let mut info: c_int = 0;

    let mut work_q = [Complex64::new(0.0, 0.0)];
    let mut rwork_q = [0.0f64];
    let mut iwork_q: [c_int; 1] = [0];
    let minus_one: c_int = -1;
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &ni,
            cptr(&mut buf),
            &ni,
            w.as_mut_ptr(),
            cptr(&mut work_q),
            &minus_one,
            rwork_q.as_mut_ptr(),
            &minus_one,
            iwork_q.as_mut_ptr(),
            &minus_one,
            &mut info,
        );
    }
    check("zheevd", info)?;
    let lwork = (work_q[0].re as usize).max(1);
    let lrwork = (rwork_q[0] as usize).max(1);
    let liwork = (iwork_q[0] as usize).max(1);
    let mut work = vec![Complex64::new(0.0, 0.0); lwork];
    let mut rwork = vec![0.0f64; lrwork];
    let mut iwork: Vec<c_int> = vec![0; liwork];
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &ni,
            cptr(&mut buf),
            &ni,
            w.as_mut_ptr(),
            cptr(&mut work),
            &as_int(lwork),
            rwork.as_mut_ptr(),
            &as_int(lrwork),
            iwork.as_mut_ptr(),
            &as_int(liwork),
            &mut info,
        );
    }
    check("zheevd", info)?;
    Ok((w, from_col_major(n, buf)))
}

/// Real symmetric eigendecomposition (divide and conquer). Eigenvalues ascending.
pub(crate) fn symmetric_eigen(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>), LinalgError> {
    let n = a.nrows();
    let ni = as_int(n);
    let mut buf = to_col_major(a);
    let mut w = vec![0.0f64; n];
    let jobz = b'V' as c_char;
    let uplo = b'U' as c_char;
    let mut info: c_int = 0;

    let mut work_q = [0.0f64];
    let mut iwork_q: [c_int; 1] = [0];
    let minus_one: c_int = -1;
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &ni,
            buf.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work_q.as_mut_ptr(),
            &minus_one,
            iwork_q.as_mut_ptr(),
            &minus_one,
            &mut info,
        );
    }
    check("dsyevd", info)?;
    let lwork = (work_q[0] as usize).max(1);
    let liwork = (iwork_q[0] as usize).max(1);
    let mut work = vec![0.0f64; lwork];
    let mut iwork: Vec<c_int> = vec![0; liwork];
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &ni,
            buf.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &as_int(lwork),
            iwork.as_mut_ptr(),
            &as_int(liwork),
            &mut info,
        );
    }
    check("dsyevd", info)?;
    Ok((w, from_col_major(n, buf)))
}

/// Householder QR of a square complex matrix. Returns the explicit `Q` and
/// the diagonal of `R`.
pub(crate) fn complex_qr(
    a: &Array2<Complex64>,
) -> Result<(Array2<Complex64>, Vec<Complex64>), LinalgError> {
    let n = a.nrows();
    let ni = as_int(n);
    let mut buf = to_col_major(a);
    let mut tau = vec![Complex64::new(0.0, 0.0); n];
    let mut info: c_int = 0;
    let minus_one: c_int = -1;

    let mut query = [Complex64::new(0.0, 0.0)];
    unsafe {
        lapack_sys::zgeqrf_(
            &ni,
            &ni,
            cptr(&mut buf),
            &ni,
            cptr(&mut tau),
            cptr(&mut query),
            &minus_one,
            &mut info,
        );
    }
    check("zgeqrf", info)?;
    let lwork = (query[0].re as usize).max(n).max(1);
    let mut work = vec![Complex64::new(0.0, 0.0); lwork];
    unsafe {
        lapack_sys::zgeqrf_(
            &ni,
            &ni,
            cptr(&mut buf),
            &ni,
            cptr(&mut tau),
            cptr(&mut work),
            &as_int(lwork),
            &mut info,
        );
    }
    check("zgeqrf", info)?;
    let r_diag: Vec<Complex64> = (0..n).map(|j| buf[j * n + j]).collect();

    unsafe {
        lapack_sys::zungqr_(
            &ni,
            &ni,
            &ni,
            cptr(&mut buf),
            &ni,
            cptr(&mut tau),
            cptr(&mut query),
            &minus_one,
            &mut info,
        );
    }
    check("zungqr", info)?;
    let lwork = (query[0].re as usize).max(n).max(1);
    let mut work = vec![Complex64::new(0.0, 0.0); lwork];
    unsafe {
        lapack_sys::zungqr_(
            &ni,
            &ni,
            &ni,
            cptr(&mut buf),
            &ni,
            cptr(&mut tau),
            cptr(&mut work),
            &as_int(lwork),
            &mut info,
        );
    }
    check("zungqr", info)?;
    Ok((from_col_major(n, buf), r_diag))
}
