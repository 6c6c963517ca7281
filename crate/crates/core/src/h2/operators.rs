//! Interpolation operators built from the pivot crosses, and the three-phase traversal.

use super::pivots::PivotQuad;
use crate::dense::{gemv, gemv_acc, gemv_ad, gemv_ad_acc};
use crate::error::{Error, Result};
use crate::hmatrix::{rank_stats, RankStats};
use crate::kernels::Kernel;
use crate::lowrank::CrossLu;
use crate::scalar::Scalar;
use crate::tree::ClusterTree;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Operators owned by one cluster.
#[derive(Debug, Clone)]
pub struct ClusterOps<T: Scalar> {
    /// Leaf only: `U_X = K[t^X, s^{X,i}] K[t^{X,i}, s^{X,i}]^{-1}`.
    pub l2p: Option<DMatrix<T>>,
    /// Leaf only: `V_X^* = K[t^{X,o}, s^{X,o}]^{-1} K[t^{X,o}, s^X]`.
    pub p2m: Option<DMatrix<T>>,
    /// Per child `c`: `K[t^{c,i}, s^{X,i}] K[t^{X,i}, s^{X,i}]^{-1}`.
    pub l2l: Vec<DMatrix<T>>,
    /// Per child `c`: `K[t^{X,o}, s^{X,o}]^{-1} K[t^{X,o}, s^{c,o}]`.
    pub m2m: Vec<DMatrix<T>>,
    /// Per list member `Y`: `K[t^{X,i}, s^{Y,o}]`.
    pub m2l: Vec<(usize, DMatrix<T>)>,
}

impl<T: Scalar> ClusterOps<T> {
    fn empty() -> Self {
        Self { l2p: None, p2m: None, l2l: Vec::new(), m2m: Vec::new(), m2l: Vec::new() }
    }

    fn scalars(&self) -> usize {
        self.l2p.as_ref().map_or(0, |m| m.len())
            + self.p2m.as_ref().map_or(0, |m| m.len())
            + self.l2l.iter().map(|m| m.len()).sum::<usize>()
            + self.m2m.iter().map(|m| m.len()).sum::<usize>()
            + self.m2l.iter().map(|(_, m)| m.len()).sum::<usize>()
    }
}

/// One nested-basis channel: pivots, operators and the list they serve.
#[derive(Debug, Clone)]
pub struct NestedOperatorSet<T: Scalar> {
    ops: Vec<ClusterOps<T>>,
    rank_in: Vec<usize>,
    rank_out: Vec<usize>,
}

fn tag(cluster: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::SingularCrossMatrix { .. } => Error::SingularCrossMatrix { cluster: Some(cluster) },
        other => other,
    }
}

/// Columns of `m` (one per entry of `ids`) that sit on a pivot are exact unit
/// vectors; overwrite the rounded solve result with them.
fn pin_unit<T: Scalar>(m: &mut DMatrix<T>, ids: &[usize], pivots: &[usize]) {
    for (col, id) in ids.iter().enumerate() {
        if let Some(k) = pivots.iter().position(|p| p == id) {
            let mut c = m.column_mut(col);
            c.fill(T::zero());
            c[k] = T::one();
        }
    }
}

fn cluster_ops<K: Kernel>(
    tree: &ClusterTree,
    lists: &[Vec<usize>],
    pivots: &[PivotQuad],
    kernel: &K,
    symmetric: bool,
    x: usize,
) -> Result<ClusterOps<K::Scalar>> {
    let q = &pivots[x];
    let c = tree.cluster(x);
    let mut ops = ClusterOps::empty();
    let (rin, rout) = (q.rank_in(), q.rank_out());
    if rin > 0 {
        // Right solves B A^{-1} go through the LU of A^T.
        let lu_t = CrossLu::new(kernel.block(&q.t_in, &q.s_in).transpose()).map_err(tag(x))?;
        let right = |rows: &[usize]| {
            let mut m = lu_t.solve(&kernel.block(rows, &q.s_in).transpose());
            pin_unit(&mut m, rows, &q.t_in);
            m.transpose()
        };
        if c.is_leaf() {
            ops.l2p = Some(right(tree.index_set(x)));
        }
        for ch in tree.children(x) {
            ops.l2l.push(right(&pivots[ch].t_in));
        }
        for &y in &lists[x] {
            if pivots[y].rank_out() > 0 {
                ops.m2l.push((y, kernel.block(&q.t_in, &pivots[y].s_out)));
            }
        }
    }
    if rout > 0 {
        if symmetric {
            ops.p2m = ops.l2p.as_ref().map(|m| m.transpose());
            ops.m2m = ops.l2l.iter().map(|m| m.transpose()).collect();
        } else {
            let lu = CrossLu::new(kernel.block(&q.t_out, &q.s_out)).map_err(tag(x))?;
            let left = |cols: &[usize]| {
                let mut m = lu.solve(&kernel.block(&q.t_out, cols));
                pin_unit(&mut m, cols, &q.s_out);
                m
            };
            if c.is_leaf() {
                ops.p2m = Some(left(tree.index_set(x)));
            }
            for ch in tree.children(x) {
                ops.m2m.push(left(&pivots[ch].s_out));
            }
        }
    }
    Ok(ops)
}

/// Assembles every operator from the pivots. With `symmetric`, the outgoing
/// operators are transposes of the incoming ones; the pivots must then have
/// been mirrored and the kernel must be symmetric.
pub fn build_operators<K: Kernel>(
    tree: &ClusterTree,
    lists: &[Vec<usize>],
    pivots: &[PivotQuad],
    kernel: &K,
    symmetric: bool,
) -> Result<NestedOperatorSet<K::Scalar>> {
    let ops = (0..tree.num_clusters())
        .into_par_iter()
        .map(|x| cluster_ops(tree, lists, pivots, kernel, symmetric, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(NestedOperatorSet {
        ops,
        rank_in: pivots.iter().map(PivotQuad::rank_in).collect(),
        rank_out: pivots.iter().map(PivotQuad::rank_out).collect(),
    })
}

impl<T: Scalar> NestedOperatorSet<T> {
    pub fn ops(&self, x: usize) -> &ClusterOps<T> {
        &self.ops[x]
    }

    pub fn rank_in(&self, x: usize) -> usize {
        self.rank_in[x]
    }

    pub fn rank_out(&self, x: usize) -> usize {
        self.rank_out[x]
    }

    pub fn memory_scalars(&self) -> usize {
        self.ops.iter().map(ClusterOps::scalars).sum()
    }

    /// Incoming ranks per level over clusters with a nonzero rank.
    pub fn rank_profile(&self, tree: &ClusterTree) -> Vec<RankStats> {
        (1..=tree.depth())
            .filter_map(|l| rank_stats(l, tree.level_ids(l).map(|x| self.rank_in[x]).filter(|&r| r > 0)))
            .collect()
    }

    /// Adds this channel's potential to `phi`. Both vectors are in tree order.
    pub fn apply_sorted(&self, tree: &ClusterTree, q: &[T], phi: &mut [T]) {
        let n = tree.num_clusters();
        let mut v: Vec<Vec<T>> = vec![Vec::new(); n];
        for l in (1..=tree.depth()).rev() {
            for x in tree.level_ids(l) {
                if self.rank_out[x] == 0 {
                    continue;
                }
                let ops = &self.ops[x];
                v[x] = match &ops.p2m {
                    Some(p2m) => gemv(p2m, &q[tree.cluster(x).range()]),
                    None => {
                        let mut acc = vec![T::zero(); self.rank_out[x]];
                        for (m, c) in ops.m2m.iter().zip(tree.children(x)) {
                            if !v[c].is_empty() {
                                gemv_acc(&mut acc, m, &v[c]);
                            }
                        }
                        acc
                    }
                };
            }
        }
        let mut u: Vec<Vec<T>> = vec![Vec::new(); n];
        for l in 1..=tree.depth() {
            for x in tree.level_ids(l) {
                if self.rank_in[x] == 0 {
                    continue;
                }
                let ops = &self.ops[x];
                let mut acc = std::mem::take(&mut u[x]);
                if acc.is_empty() {
                    acc = vec![T::zero(); self.rank_in[x]];
                }
                for (y, t) in &ops.m2l {
                    gemv_acc(&mut acc, t, &v[*y]);
                }
                match &ops.l2p {
                    Some(l2p) => gemv_acc(&mut phi[tree.cluster(x).range()], l2p, &acc),
                    None => {
                        for (m, c) in ops.l2l.iter().zip(tree.children(x)) {
                            if self.rank_in[c] == 0 {
                                continue;
                            }
                            if u[c].is_empty() {
                                u[c] = vec![T::zero(); self.rank_in[c]];
                            }
                            gemv_acc(&mut u[c], m, &acc);
                        }
                    }
                }
            }
        }
    }

    /// Adds `K̃^H p` for this channel to `phi`. Both vectors are in tree order.
    pub fn apply_adjoint_sorted(&self, tree: &ClusterTree, p: &[T], phi: &mut [T]) {
        let n = tree.num_clusters();
        let mut a: Vec<Vec<T>> = vec![Vec::new(); n];
        for l in (1..=tree.depth()).rev() {
            for x in tree.level_ids(l) {
                if self.rank_in[x] == 0 {
                    continue;
                }
                let ops = &self.ops[x];
                a[x] = match &ops.l2p {
                    Some(l2p) => gemv_ad(l2p, &p[tree.cluster(x).range()]),
                    None => {
                        let mut acc = vec![T::zero(); self.rank_in[x]];
                        for (m, c) in ops.l2l.iter().zip(tree.children(x)) {
                            if !a[c].is_empty() {
                                gemv_ad_acc(&mut acc, m, &a[c]);
                            }
                        }
                        acc
                    }
                };
            }
        }
        let mut b: Vec<Vec<T>> = (0..n).map(|y| vec![T::zero(); self.rank_out[y]]).collect();
        for l in 1..=tree.depth() {
            for x in tree.level_ids(l) {
                for (y, t) in &self.ops[x].m2l {
                    gemv_ad_acc(&mut b[*y], t, &a[x]);
                }
            }
        }
        for l in 1..=tree.depth() {
            for x in tree.level_ids(l) {
                if self.rank_out[x] == 0 {
                    continue;
                }
                let ops = &self.ops[x];
                let bx = std::mem::take(&mut b[x]);
                match &ops.p2m {
                    Some(p2m) => gemv_ad_acc(&mut phi[tree.cluster(x).range()], p2m, &bx),
                    None => {
                        for (m, c) in ops.m2m.iter().zip(tree.children(x)) {
                            if self.rank_out[c] > 0 {
                                gemv_ad_acc(&mut b[c], m, &bx);
                            }
                        }
                    }
                }
            }
        }
    }
}
