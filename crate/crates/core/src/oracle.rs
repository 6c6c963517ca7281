//! Brute-force reference products and error measures.

use crate::kernels::Kernel;
use crate::scalar::{norm2, random_vector, Scalar};
use nalgebra::{ComplexField, DMatrix};
use num_traits::Zero;
use rayon::prelude::*;

/// Dense `K q` evaluated entry by entry, optionally from a stored matrix.
pub struct DenseOracle<'a, K: Kernel> {
    kernel: &'a K,
    matrix: Option<DMatrix<K::Scalar>>,
}

impl<'a, K: Kernel> DenseOracle<'a, K> {
    /// Evaluates entries on the fly at every product.
    pub fn lazy(kernel: &'a K) -> Self {
        Self { kernel, matrix: None }
    }

    /// Assembles and keeps the full `N × N` matrix.
    pub fn assembled(kernel: &'a K) -> Self {
        let n = kernel.size();
        let cols: Vec<Vec<K::Scalar>> = (0..n)
            .into_par_iter()
            .map(|j| (0..n).map(|i| kernel.entry(i, j)).collect())
            .collect();
        let m = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
        Self { kernel, matrix: Some(m) }
    }

    pub fn size(&self) -> usize {
        self.kernel.size()
    }

    pub fn mvp(&self, q: &[K::Scalar]) -> Vec<K::Scalar> {
        self.mvp_many(std::slice::from_ref(&q.to_vec())).pop().unwrap()
    }

    /// Products with several vectors in one pass over the entries.
    pub fn mvp_many(&self, qs: &[Vec<K::Scalar>]) -> Vec<Vec<K::Scalar>> {
        let n = self.size();
        if let Some(m) = &self.matrix {
            return qs.iter().map(|q| crate::dense::gemv(m, q)).collect();
        }
        let rows: Vec<Vec<K::Scalar>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = vec![K::Scalar::zero(); qs.len()];
                for j in 0..n {
                    let k = self.kernel.entry(i, j);
                    for (a, q) in acc.iter_mut().zip(qs) {
                        *a += k * q[j];
                    }
                }
                acc
            })
            .collect();
        (0..qs.len()).map(|v| rows.iter().map(|r| r[v]).collect()).collect()
    }

    /// `K^H p`.
    pub fn mvp_adjoint(&self, p: &[K::Scalar]) -> Vec<K::Scalar> {
        if let Some(m) = &self.matrix {
            return crate::dense::gemv_ad(m, p);
        }
        let n = self.size();
        (0..n)
            .into_par_iter()
            .map(|j| {
                let mut acc = K::Scalar::zero();
                for (i, pi) in p.iter().enumerate() {
                    acc += self.kernel.entry(i, j).conjugate() * *pi;
                }
                acc
            })
            .collect()
    }
}

/// Largest singular value of `A` by power iteration on `A^H A`.
pub fn two_norm_estimate<T: Scalar>(
    n: usize,
    apply: impl Fn(&[T]) -> Vec<T>,
    apply_adjoint: impl Fn(&[T]) -> Vec<T>,
    iters: usize,
    seed: u64,
) -> f64 {
    let mut x: Vec<T> = random_vector(n, seed);
    let mut sigma = 0.0;
    for _ in 0..iters {
        let nx = norm2(&x);
        if nx == 0.0 {
            return 0.0;
        }
        let inv = T::from_real(1.0 / nx);
        for v in &mut x {
            *v *= inv;
        }
        let y = apply(&x);
        sigma = norm2(&y);
        x = apply_adjoint(&y);
    }
    sigma
}

/// `‖A − B‖₂ / ‖A‖₂` estimated by power iteration, given products with both
/// operators and their adjoints.
pub fn relative_two_norm_error<T: Scalar>(
    n: usize,
    exact: impl Fn(&[T]) -> Vec<T> + Copy,
    exact_adjoint: impl Fn(&[T]) -> Vec<T> + Copy,
    approx: impl Fn(&[T]) -> Vec<T> + Copy,
    approx_adjoint: impl Fn(&[T]) -> Vec<T> + Copy,
    iters: usize,
) -> f64 {
    let diff = |x: &[T]| sub(exact(x), approx(x));
    let diff_adj = |x: &[T]| sub(exact_adjoint(x), approx_adjoint(x));
    let e = two_norm_estimate(n, diff, diff_adj, iters, 17);
    let a = two_norm_estimate(n, exact, exact_adjoint, iters, 19);
    e / a
}

fn sub<T: Scalar>(mut a: Vec<T>, b: Vec<T>) -> Vec<T> {
    for (x, y) in a.iter_mut().zip(b) {
        *x -= y;
    }
    a
}
