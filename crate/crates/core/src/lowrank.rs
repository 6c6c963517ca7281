//! Partially pivoted adaptive cross approximation and small dense solves.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::scalar::Scalar;
use nalgebra::ComplexField;
use num_traits::{One, Zero};
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcaOptions {
    pub eps: f64,
    /// Hard cap on the rank; `min(m, n)` when `None`.
    pub max_rank: Option<usize>,
    /// Local index of the first pivot row; row 0 when `None`.
    pub first_row: Option<usize>,
}

impl AcaOptions {
    pub fn new(eps: f64) -> Self {
        Self { eps, max_rank: None, first_row: None }
    }
}

/// `K[rows, cols] ≈ U V^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor<T: Scalar> {
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
    /// Global indices of the pivot rows, in selection order.
    pub row_pivots: Vec<usize>,
    pub col_pivots: Vec<usize>,
    /// Set when the iteration ran out of rows after hitting zero residuals.
    pub exhausted: bool,
}

impl<T: Scalar> LowRankFactor<T> {
    pub fn rank(&self) -> usize {
        self.row_pivots.len()
    }

    /// Stored scalars, `p (m + n)`.
    pub fn scalars(&self) -> usize {
        self.u.len() + self.v.len()
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        &self.u * self.v.adjoint()
    }
}

struct Cross<T> {
    /// Residual columns, each of length m.
    cols: Vec<Vec<T>>,
    /// Scaled residual rows, each of length n.
    rows: Vec<Vec<T>>,
    row_piv: Vec<usize>,
    col_piv: Vec<usize>,
    exhausted: bool,
}

fn cross_approx<K: Kernel>(kernel: &K, rows: &[usize], cols: &[usize], opts: &AcaOptions) -> Cross<K::Scalar> {
    let (m, n) = (rows.len(), cols.len());
    let mut out = Cross { cols: Vec::new(), rows: Vec::new(), row_piv: Vec::new(), col_piv: Vec::new(), exhausted: false };
    if m == 0 || n == 0 {
        return out;
    }
    let cap = opts.max_rank.unwrap_or(usize::MAX).min(m).min(n);
    let mut used_row = vec![false; m];
    let mut used_col = vec![false; n];
    let mut norm2 = 0.0f64;
    let mut scale = 0.0f64;
    let mut next = opts.first_row.filter(|&r| r < m).unwrap_or(0);
    let mut row = vec![K::Scalar::zero(); n];

    while out.row_piv.len() < cap {
        let i = next;
        used_row[i] = true;
        for (r, &c) in row.iter_mut().zip(cols) {
            *r = kernel.entry(rows[i], c);
            scale = scale.max(r.abs_val());
        }
        for (u, w) in out.cols.iter().zip(&out.rows) {
            let a = u[i];
            for (r, wv) in row.iter_mut().zip(w) {
                *r -= a * *wv;
            }
        }
        let mut best = None;
        let mut best_abs = -1.0;
        for (j, r) in row.iter().enumerate() {
            let a = r.abs_val();
            if !used_col[j] && a > best_abs {
                best_abs = a;
                best = Some(j);
            }
        }
        let tiny = 64.0 * f64::EPSILON * scale;
        let j = match best {
            Some(j) if best_abs > tiny && best_abs > 0.0 => j,
            _ => match used_row.iter().position(|u| !u) {
                Some(r) => {
                    next = r;
                    continue;
                }
                None => {
                    out.exhausted = true;
                    break;
                }
            },
        };
        used_col[j] = true;
        let inv = K::Scalar::one() / row[j];
        let w: Vec<K::Scalar> = row.iter().map(|r| *r * inv).collect();
        let mut u: Vec<K::Scalar> = rows.iter().map(|&r| kernel.entry(r, cols[j])).collect();
        for (uk, wk) in out.cols.iter().zip(&out.rows) {
            let b = wk[j];
            for (x, y) in u.iter_mut().zip(uk) {
                *x -= b * *y;
            }
        }
        let uu: f64 = u.iter().map(|x| x.modulus_squared()).sum();
        let ww: f64 = w.iter().map(|x| x.modulus_squared()).sum();
        let mut cross = 0.0;
        for (uk, wk) in out.cols.iter().zip(&out.rows) {
            let mut uu_k = K::Scalar::zero();
            for (a, b) in uk.iter().zip(&u) {
                uu_k += a.conjugate() * *b;
            }
            let mut ww_k = K::Scalar::zero();
            for (a, b) in w.iter().zip(wk) {
                ww_k += *a * b.conjugate();
            }
            cross += (uu_k * ww_k).real();
        }
        norm2 = (norm2 + uu * ww + 2.0 * cross).max(0.0);

        // Next row: largest residual in the new column among unused rows.
        let mut nb = None;
        let mut nb_abs = -1.0;
        for (r, x) in u.iter().enumerate() {
            let a = x.abs_val();
            if !used_row[r] && a > nb_abs {
                nb_abs = a;
                nb = Some(r);
            }
        }
        out.cols.push(u);
        out.rows.push(w);
        out.row_piv.push(i);
        out.col_piv.push(j);
        if (uu * ww).sqrt() <= opts.eps * norm2.sqrt() {
            break;
        }
        match nb {
            Some(r) => next = r,
            None => break,
        }
    }
    out
}

/// ACA factorisation of `K[rows, cols]`.
pub fn aca_factor<K: Kernel>(kernel: &K, rows: &[usize], cols: &[usize], opts: &AcaOptions) -> LowRankFactor<K::Scalar> {
    let c = cross_approx(kernel, rows, cols, opts);
    let p = c.row_piv.len();
    let u = DMatrix::from_fn(rows.len(), p, |a, k| c.cols[k][a]);
    let v = DMatrix::from_fn(cols.len(), p, |b, k| c.rows[k][b].conjugate());
    LowRankFactor {
        u,
        v,
        row_pivots: c.row_piv.iter().map(|&a| rows[a]).collect(),
        col_pivots: c.col_piv.iter().map(|&b| cols[b]).collect(),
        exhausted: c.exhausted,
    }
}

/// Pivot rows and columns (global indices) selected by ACA on `K[rows, cols]`.
pub fn aca_pivots<K: Kernel>(kernel: &K, rows: &[usize], cols: &[usize], opts: &AcaOptions) -> (Vec<usize>, Vec<usize>) {
    let c = cross_approx(kernel, rows, cols, opts);
    (
        c.row_piv.iter().map(|&a| rows[a]).collect(),
        c.col_piv.iter().map(|&b| cols[b]).collect(),
    )
}

/// Local index of the row point closest to the centroid of the column points.
pub fn nearest_to_centroid<K: Kernel>(kernel: &K, rows: &[usize], cols: &[usize]) -> Option<usize> {
    let pts = kernel.points()?;
    if rows.is_empty() || cols.is_empty() {
        return None;
    }
    let mut c = [0.0; 3];
    for &j in cols {
        let p = pts.point(j);
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    for x in &mut c {
        *x /= cols.len() as f64;
    }
    rows.iter()
        .map(|&i| {
            let p = pts.point(i);
            (0..3).map(|k| (p[k] - c[k]).powi(2)).sum::<f64>()
        })
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(a, _)| a)
}

/// ACA options with the geometric starting row filled in.
pub fn geometric_options<K: Kernel>(kernel: &K, rows: &[usize], cols: &[usize], eps: f64) -> AcaOptions {
    AcaOptions { eps, max_rank: None, first_row: nearest_to_centroid(kernel, rows, cols) }
}

/// LU factors of a square pivot cross matrix.
pub struct CrossLu<T: Scalar> {
    lu: nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl<T: Scalar> CrossLu<T> {
    pub fn new(a: DMatrix<T>) -> Result<Self> {
        assert!(a.is_square(), "cross matrix must be square");
        let n = a.nrows();
        let lu = a.lu();
        if n > 0 {
            let u = lu.u();
            let d: Vec<f64> = u.diagonal().iter().map(|x| x.abs_val()).collect();
            let max = d.iter().cloned().fold(0.0, f64::max);
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(min > f64::EPSILON * max) {
                return Err(Error::SingularCrossMatrix { cluster: None });
            }
        }
        Ok(Self { lu, n })
    }

    /// `A^{-1} B`.
    pub fn solve(&self, b: &DMatrix<T>) -> DMatrix<T> {
        assert_eq!(b.nrows(), self.n);
        if self.n == 0 {
            return b.clone();
        }
        self.lu.solve(b).expect("checked nonsingular")
    }
}

/// `A^{-1} B` through partially pivoted LU.
pub fn solve_square<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    if a.nrows() != b.nrows() {
        return Err(Error::LengthMismatch { expected: a.nrows(), got: b.nrows() });
    }
    Ok(CrossLu::new(a.clone())?.solve(b))
}

/// `B A^{-1}`, computed as `(A^T \ B^T)^T`.
pub fn solve_right<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    if a.ncols() != b.ncols() {
        return Err(Error::LengthMismatch { expected: a.ncols(), got: b.ncols() });
    }
    Ok(CrossLu::new(a.transpose())?.solve(&b.transpose()).transpose())
}
