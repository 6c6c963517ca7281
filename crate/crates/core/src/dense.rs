//! Slice-level matrix-vector kernels used by the traversals.

use crate::scalar::Scalar;
use nalgebra::{DMatrix, DVectorView, DVectorViewMut};

/// `y += A x`.
#[inline]
pub fn gemv_acc<T: Scalar>(y: &mut [T], a: &DMatrix<T>, x: &[T]) {
    if a.is_empty() {
        return;
    }
    let (m, n) = a.shape();
    let mut yv = DVectorViewMut::from_slice(y, m);
    yv.gemv(T::one(), a, &DVectorView::from_slice(x, n), T::one());
}

/// `y += A^H x`.
#[inline]
pub fn gemv_ad_acc<T: Scalar>(y: &mut [T], a: &DMatrix<T>, x: &[T]) {
    if a.is_empty() {
        return;
    }
    let (m, n) = a.shape();
    let mut yv = DVectorViewMut::from_slice(y, n);
    yv.gemv_ad(T::one(), a, &DVectorView::from_slice(x, m), T::one());
}

/// `A x` as a new vector.
#[inline]
pub fn gemv<T: Scalar>(a: &DMatrix<T>, x: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); a.nrows()];
    gemv_acc(&mut y, a, x);
    y
}

/// `A^H x` as a new vector.
#[inline]
pub fn gemv_ad<T: Scalar>(a: &DMatrix<T>, x: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); a.ncols()];
    gemv_ad_acc(&mut y, a, x);
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Complex64;

    #[test]
    fn products_match_nalgebra() {
        let a = DMatrix::from_fn(3, 2, |i, j| Complex64::new(i as f64, j as f64 + 1.0));
        let x = [Complex64::new(1.0, -1.0), Complex64::new(0.5, 2.0)];
        let y = gemv(&a, &x);
        let expect = &a * nalgebra::DVector::from_column_slice(&x);
        assert_eq!(y.as_slice(), expect.as_slice());
        let z = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(2.0, 0.0)];
        let w = gemv_ad(&a, &z);
        let expect = a.adjoint() * nalgebra::DVector::from_column_slice(&z);
        for (p, q) in w.iter().zip(expect.iter()) {
            assert!((p - q).norm() < 1e-14);
        }
        let empty: DMatrix<f64> = DMatrix::zeros(0, 4);
        assert_eq!(gemv_ad(&empty, &[]), vec![0.0; 4]);
    }
}
