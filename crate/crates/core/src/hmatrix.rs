//! Non-nested block low-rank representations and dense near fields.
//!
//! Vectors passed to the `*_sorted` methods are in tree order, i.e. entry `k`
//! belongs to particle `tree.permutation()[k]`.

use crate::dense::{gemv, gemv_acc, gemv_ad, gemv_ad_acc};
use crate::kernels::Kernel;
use crate::lowrank::{aca_factor, geometric_options, LowRankFactor};
use crate::partition::{ListSelector, PartitionLists};
use crate::scalar::Scalar;
use crate::tree::ClusterTree;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Dense blocks `K[t^X, s^Y]` for leaf pairs in the near-field lists.
#[derive(Debug, Clone)]
pub struct NearField<T: Scalar> {
    blocks: Vec<(usize, usize, DMatrix<T>)>,
}

impl<T: Scalar> NearField<T> {
    pub fn build<K: Kernel<Scalar = T>>(tree: &ClusterTree, partition: &PartitionLists, kernel: &K) -> Self {
        let pairs: Vec<(usize, usize)> = tree
            .level_ids(tree.depth())
            .flat_map(|x| partition.near(x).iter().map(move |&y| (x, y)))
            .filter(|&(x, y)| !tree.cluster(x).is_empty() && !tree.cluster(y).is_empty())
            .collect();
        let blocks = pairs
            .into_par_iter()
            .map(|(x, y)| (x, y, kernel.block(tree.index_set(x), tree.index_set(y))))
            .collect();
        Self { blocks }
    }

    pub fn blocks(&self) -> &[(usize, usize, DMatrix<T>)] {
        &self.blocks
    }

    pub fn apply_sorted(&self, tree: &ClusterTree, q: &[T], phi: &mut [T]) {
        for (x, y, b) in &self.blocks {
            let (rx, ry) = (tree.cluster(*x).range(), tree.cluster(*y).range());
            gemv_acc(&mut phi[rx], b, &q[ry]);
        }
    }

    pub fn apply_adjoint_sorted(&self, tree: &ClusterTree, p: &[T], phi: &mut [T]) {
        for (x, y, b) in &self.blocks {
            let (rx, ry) = (tree.cluster(*x).range(), tree.cluster(*y).range());
            gemv_ad_acc(&mut phi[ry], b, &p[rx]);
        }
    }

    pub fn scalars(&self) -> usize {
        self.blocks.iter().map(|b| b.2.len()).sum()
    }
}

/// One admissible pair and its factor.
#[derive(Debug, Clone)]
pub struct LowRankBlock<T: Scalar> {
    pub x: usize,
    pub y: usize,
    pub factor: LowRankFactor<T>,
}

/// Per-level rank summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankStats {
    pub level: u32,
    pub max: usize,
    pub min: usize,
    pub avg: f64,
    pub count: usize,
}

pub(crate) fn rank_stats(level: u32, ranks: impl Iterator<Item = usize>) -> Option<RankStats> {
    let v: Vec<usize> = ranks.collect();
    if v.is_empty() {
        return None;
    }
    Some(RankStats {
        level,
        max: *v.iter().max().unwrap(),
        min: *v.iter().min().unwrap(),
        avg: v.iter().sum::<usize>() as f64 / v.len() as f64,
        count: v.len(),
    })
}

/// Every admissible block factored independently by ACA.
#[derive(Debug, Clone)]
pub struct BlockLowRankRep<T: Scalar> {
    blocks: Vec<LowRankBlock<T>>,
    near: Option<NearField<T>>,
    eps: f64,
}

/// Factors every `(X, Y)` with `Y` in the selected list of `X`, level by level.
/// With `with_near` the dense leaf blocks of the partition's near lists are added.
pub fn build_blr<K: Kernel>(
    tree: &ClusterTree,
    partition: &PartitionLists,
    sel: ListSelector,
    kernel: &K,
    eps: f64,
    with_near: bool,
) -> BlockLowRankRep<K::Scalar> {
    let pairs: Vec<(usize, usize)> = (1..=tree.depth())
        .flat_map(|l| tree.level_ids(l))
        .flat_map(|x| partition.select(x, sel).into_iter().map(move |y| (x, y)))
        .collect();
    let blocks = pairs
        .into_par_iter()
        .map(|(x, y)| {
            let (rows, cols) = (tree.index_set(x), tree.index_set(y));
            let opts = geometric_options(kernel, rows, cols, eps);
            LowRankBlock { x, y, factor: aca_factor(kernel, rows, cols, &opts) }
        })
        .collect();
    let near = with_near.then(|| NearField::build(tree, partition, kernel));
    BlockLowRankRep { blocks, near, eps }
}

impl<T: Scalar> BlockLowRankRep<T> {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn blocks(&self) -> &[LowRankBlock<T>] {
        &self.blocks
    }

    pub fn near(&self) -> Option<&NearField<T>> {
        self.near.as_ref()
    }

    /// `φ = K̃ q` in particle order.
    pub fn mvp(&self, tree: &ClusterTree, q: &[T]) -> crate::Result<Vec<T>> {
        if q.len() != tree.num_points() {
            return Err(crate::Error::LengthMismatch { expected: tree.num_points(), got: q.len() });
        }
        let qs = tree.to_tree_order(q);
        let mut phi = vec![T::zero(); q.len()];
        self.apply_sorted(tree, &qs, &mut phi);
        Ok(tree.from_tree_order(&phi))
    }

    pub fn apply_sorted(&self, tree: &ClusterTree, q: &[T], phi: &mut [T]) {
        for b in &self.blocks {
            if b.factor.rank() == 0 {
                continue;
            }
            let (rx, ry) = (tree.cluster(b.x).range(), tree.cluster(b.y).range());
            let t = gemv_ad(&b.factor.v, &q[ry]);
            gemv_acc(&mut phi[rx], &b.factor.u, &t);
        }
        if let Some(n) = &self.near {
            n.apply_sorted(tree, q, phi);
        }
    }

    pub fn apply_adjoint_sorted(&self, tree: &ClusterTree, p: &[T], phi: &mut [T]) {
        for b in &self.blocks {
            if b.factor.rank() == 0 {
                continue;
            }
            let (rx, ry) = (tree.cluster(b.x).range(), tree.cluster(b.y).range());
            let t = gemv_ad(&b.factor.u, &p[rx]);
            let w = gemv(&b.factor.v, &t);
            for (a, v) in phi[ry].iter_mut().zip(w) {
                *a += v;
            }
        }
        if let Some(n) = &self.near {
            n.apply_adjoint_sorted(tree, p, phi);
        }
    }

    /// `Σ p (m + n)` over factors plus the dense block areas.
    pub fn memory_scalars(&self) -> usize {
        self.blocks.iter().map(|b| b.factor.scalars()).sum::<usize>()
            + self.near.as_ref().map_or(0, NearField::scalars)
    }

    pub fn rank_profile(&self, tree: &ClusterTree) -> Vec<RankStats> {
        (1..=tree.depth())
            .filter_map(|l| {
                rank_stats(
                    l,
                    self.blocks
                        .iter()
                        .filter(|b| tree.cluster(b.x).level == l && b.factor.rank() > 0)
                        .map(|b| b.factor.rank()),
                )
            })
            .collect()
    }
}
