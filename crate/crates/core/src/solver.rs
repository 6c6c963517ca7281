//! Restart-free GMRES over any linear operator.

use crate::error::{Error, Result};
use crate::h2::HierRep;
use crate::kernels::Kernel;
use crate::oracle::DenseOracle;
use crate::scalar::{norm2, Scalar};
use std::time::Instant;

/// Square matrix action `x -> A x`.
pub trait LinearOperator<T: Scalar> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T]) -> Vec<T>;
}

impl<T: Scalar> LinearOperator<T> for HierRep<T> {
    fn dim(&self) -> usize {
        self.size()
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.mvp(x).expect("operator and vector dimensions agree")
    }
}

impl<K: Kernel> LinearOperator<K::Scalar> for DenseOracle<'_, K> {
    fn dim(&self) -> usize {
        self.size()
    }

    fn apply(&self, x: &[K::Scalar]) -> Vec<K::Scalar> {
        self.mvp(x)
    }
}

/// Operator from a closure.
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<T: Scalar, F: Fn(&[T]) -> Vec<T>> LinearOperator<T> for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    /// Stop once `‖b − A x‖ / ‖b‖ <= tol`.
    pub tol: f64,
    /// Defaults to the problem size.
    pub max_iter: Option<usize>,
    pub record_residuals: bool,
}

impl GmresConfig {
    pub fn new(tol: f64) -> Self {
        Self { tol, max_iter: None, record_residuals: true }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    pub solution: Vec<T>,
    pub iterations: usize,
    /// Relative residual from the least-squares recurrence.
    pub relative_residual: f64,
    /// False when `max_iter` was reached first.
    pub converged: bool,
    pub seconds: f64,
    pub residuals: Vec<f64>,
}

/// Plane rotation zeroing `b` in `(a, b)`; returns `(c, s)` with `c` real.
fn givens<T: Scalar>(a: T, b: T) -> (f64, T) {
    let (na, nb) = (a.modulus(), b.modulus());
    if nb == 0.0 {
        (1.0, T::zero())
    } else if na == 0.0 {
        (0.0, T::one())
    } else {
        let r = na.hypot(nb);
        (na / r, a.unscale(na) * b.conjugate().unscale(r))
    }
}

fn rotate<T: Scalar>(c: f64, s: T, x: T, y: T) -> (T, T) {
    (x.scale(c) + s * y, y.scale(c) - s.conjugate() * x)
}

pub fn gmres<T: Scalar, A: LinearOperator<T> + ?Sized>(a: &A, b: &[T], cfg: GmresConfig) -> Result<SolveReport<T>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: b.len() });
    }
    if !(cfg.tol > 0.0) || cfg.max_iter == Some(0) {
        return Err(Error::InvalidParameter("GMRES needs tol > 0 and max_iter >= 1".into()));
    }
    let start = Instant::now();
    let beta = norm2(b);
    if beta == 0.0 {
        return Ok(SolveReport {
            solution: vec![T::zero(); n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            seconds: start.elapsed().as_secs_f64(),
            residuals: Vec::new(),
        });
    }
    let max_iter = cfg.max_iter.unwrap_or(n).max(1);
    let mut basis: Vec<Vec<T>> = vec![b.iter().map(|x| x.unscale(beta)).collect()];
    // Column k of the Hessenberg matrix, already rotated: h[k][0..=k].
    let mut h: Vec<Vec<T>> = Vec::new();
    let mut rots: Vec<(f64, T)> = Vec::new();
    let mut g: Vec<T> = vec![T::from_real(beta)];
    let mut residuals = Vec::new();
    let mut rel = 1.0;
    let mut converged = false;

    for k in 0..max_iter {
        let mut w = a.apply(&basis[k]);
        let wnorm0 = norm2(&w);
        let mut col = vec![T::zero(); k + 2];
        for (j, v) in basis.iter().enumerate() {
            let mut dot = T::zero();
            for (x, y) in v.iter().zip(&w) {
                dot += x.conjugate() * *y;
            }
            col[j] = dot;
            for (x, y) in w.iter_mut().zip(v) {
                *x -= dot * *y;
            }
        }
        let hnext = norm2(&w);
        col[k + 1] = T::from_real(hnext);
        for (j, &(c, s)) in rots.iter().enumerate() {
            let (x, y) = rotate(c, s, col[j], col[j + 1]);
            col[j] = x;
            col[j + 1] = y;
        }
        let (c, s) = givens(col[k], col[k + 1]);
        let (x, _) = rotate(c, s, col[k], col[k + 1]);
        col[k] = x;
        col.truncate(k + 1);
        let (gk, gk1) = rotate(c, s, g[k], T::zero());
        g[k] = gk;
        g.push(gk1);
        rots.push((c, s));
        h.push(col);

        rel = gk1.modulus() / beta;
        if cfg.record_residuals {
            residuals.push(rel);
        }
        let breakdown = hnext <= 1e-14 * wnorm0.max(f64::MIN_POSITIVE);
        if rel <= cfg.tol || breakdown {
            converged = rel <= cfg.tol || breakdown;
            break;
        }
        basis.push(w.iter().map(|x| x.unscale(hnext)).collect());
    }

    // Back substitution on the rotated Hessenberg matrix.
    let m = h.len();
    let mut y = vec![T::zero(); m];
    for i in (0..m).rev() {
        let mut acc = g[i];
        for j in i + 1..m {
            acc -= h[j][i] * y[j];
        }
        y[i] = if h[i][i].is_zero() { T::zero() } else { acc / h[i][i] };
    }
    let mut x = vec![T::zero(); n];
    for (v, yj) in basis.iter().zip(&y) {
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi += *yj * *vi;
        }
    }
    Ok(SolveReport {
        solution: x,
        iterations: m,
        relative_residual: rel,
        converged,
        seconds: start.elapsed().as_secs_f64(),
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::FnKernel;
    use crate::scalar::{random_vector, relative_error, Complex64};
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    #[test]
    fn identity_converges_in_one_step() {
        let id = FnOperator::new(6, |x: &[f64]| x.to_vec());
        let b: Vec<f64> = random_vector(6, 2);
        let r = gmres(&id, &b, GmresConfig::new(1e-12)).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert!(relative_error(&r.solution, &b) < 1e-15);
    }

    #[test]
    fn zero_rhs_and_bad_input() {
        let id = FnOperator::new(3, |x: &[f64]| x.to_vec());
        let r = gmres(&id, &[0.0; 3], GmresConfig::new(1e-10)).unwrap();
        assert_eq!((r.iterations, r.solution), (0, vec![0.0; 3]));
        assert!(gmres(&id, &[1.0; 2], GmresConfig::new(1e-10)).is_err());
        assert!(gmres(&id, &[1.0; 3], GmresConfig::new(0.0)).is_err());
    }

    fn check_against_direct<T: Scalar>(k: &FnKernel<T, impl Fn(usize, usize) -> T + Sync>, seed: u64) {
        let n = k.size();
        let o = DenseOracle::assembled(k);
        let b: Vec<T> = random_vector(n, seed);
        let r = gmres(&o, &b, GmresConfig::new(1e-13)).unwrap();
        assert!(r.converged);
        let m = DMatrix::from_fn(n, n, |i, j| k.entry(i, j));
        let direct = m.lu().solve(&DVector::from_column_slice(&b)).unwrap();
        assert!(relative_error(&r.solution, direct.as_slice()) < 1e-10);
        assert!(r.residuals.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn matches_direct_solve() {
        let k = FnKernel::new(40, |i, j| {
            let d = (i as f64 - j as f64).abs();
            if i == j { 3.0 } else { 1.0 / (1.0 + d * d) }
        });
        check_against_direct(&k, 5);
        let kc = FnKernel::new(30, |i, j| {
            let d = i as f64 - j as f64;
            if i == j { Complex64::new(4.0, 1.0) } else { Complex64::new(d.cos(), d.sin()) / (1.0 + d * d) }
        });
        check_against_direct(&kc, 6);
    }

    #[test]
    fn max_iter_is_flagged() {
        let k = FnKernel::new(30, |i, j| if i == j { 1.0 + i as f64 } else { 0.01 });
        let o = DenseOracle::assembled(&k);
        let b: Vec<f64> = random_vector(30, 1);
        let cfg = GmresConfig { tol: 1e-14, max_iter: Some(3), record_residuals: true };
        let r = gmres(&o, &b, cfg).unwrap();
        assert_eq!(r.iterations, 3);
        assert!(!r.converged);
        assert_eq!(r.residuals.len(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn residuals_never_increase(n in 2usize..30, seed in 0u64..1000, shift in 1.0f64..5.0) {
            let m: Vec<f64> = random_vector(n * n, seed);
            let k = FnKernel::new(n, move |i, j| m[i * n + j] + if i == j { shift } else { 0.0 });
            let o = DenseOracle::assembled(&k);
            let b: Vec<f64> = random_vector(n, seed + 1);
            let r = gmres(&o, &b, GmresConfig::new(1e-12)).unwrap();
            prop_assert!(r.residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
            let res = {
                let ax = o.mvp(&r.solution);
                let d: Vec<f64> = ax.iter().zip(&b).map(|(x, y)| x - y).collect();
                norm2(&d) / norm2(&b)
            };
            prop_assert!(res <= 1e-9, "true residual {}", res);
        }
    }
}
