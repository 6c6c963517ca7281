//! Nested-basis engine and the algorithm variants built on it.

mod operators;
mod pivots;

pub use operators::{build_operators, ClusterOps, NestedOperatorSet};
pub use pivots::{select_pivots, select_pivots_b2t, select_pivots_t2b, PivotConfig, PivotQuad, Traversal};

use crate::error::{Error, Result};
use crate::hmatrix::{build_blr, BlockLowRankRep, NearField, RankStats};
use crate::kernels::Kernel;
use crate::partition::{Admissibility, ListSelector, PartitionLists};
use crate::scalar::Scalar;
use crate::tree::ClusterTree;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// The seven fast MVP algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Weak admissibility; bottom-up NCA on far pairs and top-down NCA on vertex-sharing pairs.
    H2StarBT,
    /// Weak admissibility; bottom-up NCA on far pairs and per-block ACA on vertex-sharing pairs.
    H2PlusHStar,
    /// Strong admissibility; bottom-up NCA.
    H2StdB,
    /// Strong admissibility; top-down NCA.
    H2StdT,
    /// Weak admissibility; top-down NCA over the whole interaction list.
    H2StarT,
    /// Weak admissibility; per-block ACA.
    HStar,
    /// Strong admissibility; per-block ACA.
    HStd,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::H2StarBT,
        Variant::H2PlusHStar,
        Variant::H2StdB,
        Variant::H2StdT,
        Variant::H2StarT,
        Variant::HStar,
        Variant::HStd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::H2StarBT => "h2star-bt",
            Variant::H2PlusHStar => "h2plusH-star",
            Variant::H2StdB => "h2std-b",
            Variant::H2StdT => "h2std-t",
            Variant::H2StarT => "h2star-t",
            Variant::HStar => "hstar",
            Variant::HStd => "hstd",
        }
    }

    /// Near-field admissibility and legs making up the variant.
    pub fn layout(self, dim: usize, eps_far: f64, eps_ver: f64) -> (Admissibility, Vec<LegSpec>) {
        let weak = Admissibility::WeakVertex;
        let strong = Admissibility::strong(dim);
        let nested = |adm, sel, traversal, eps| LegSpec { admissibility: adm, selector: sel, kind: LegKind::Nested(traversal), eps };
        let aca = |adm, sel, eps| LegSpec { admissibility: adm, selector: sel, kind: LegKind::Aca, eps };
        match self {
            Variant::H2StarBT => (
                weak,
                vec![
                    nested(weak, ListSelector::Far, Traversal::BottomUp, eps_far),
                    nested(weak, ListSelector::Vertex, Traversal::TopDown, eps_ver),
                ],
            ),
            Variant::H2PlusHStar => (
                weak,
                vec![
                    nested(weak, ListSelector::Far, Traversal::BottomUp, eps_far),
                    aca(weak, ListSelector::Vertex, eps_ver),
                ],
            ),
            Variant::H2StdB => (strong, vec![nested(strong, ListSelector::Far, Traversal::BottomUp, eps_far)]),
            Variant::H2StdT => (strong, vec![nested(strong, ListSelector::Far, Traversal::TopDown, eps_far)]),
            Variant::H2StarT => (weak, vec![nested(weak, ListSelector::All, Traversal::TopDown, eps_far)]),
            Variant::HStar => (weak, vec![aca(weak, ListSelector::All, eps_far)]),
            Variant::HStd => (strong, vec![aca(strong, ListSelector::Far, eps_far)]),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegKind {
    Nested(Traversal),
    Aca,
}

/// One compressed component of a representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegSpec {
    pub admissibility: Admissibility,
    pub selector: ListSelector,
    pub kind: LegKind,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct NestedChannel<T: Scalar> {
    pub lists: Vec<Vec<usize>>,
    pub pivots: Vec<PivotQuad>,
    pub ops: NestedOperatorSet<T>,
}

#[derive(Debug, Clone)]
pub enum Leg<T: Scalar> {
    Nested(NestedChannel<T>),
    LowRank(BlockLowRankRep<T>),
}

impl<T: Scalar> Leg<T> {
    fn apply_sorted(&self, tree: &ClusterTree, q: &[T], phi: &mut [T]) {
        match self {
            Leg::Nested(c) => c.ops.apply_sorted(tree, q, phi),
            Leg::LowRank(b) => b.apply_sorted(tree, q, phi),
        }
    }

    fn apply_adjoint_sorted(&self, tree: &ClusterTree, p: &[T], phi: &mut [T]) {
        match self {
            Leg::Nested(c) => c.ops.apply_adjoint_sorted(tree, p, phi),
            Leg::LowRank(b) => b.apply_adjoint_sorted(tree, p, phi),
        }
    }

    pub fn memory_scalars(&self) -> usize {
        match self {
            Leg::Nested(c) => c.ops.memory_scalars(),
            Leg::LowRank(b) => b.memory_scalars(),
        }
    }

    pub fn rank_profile(&self, tree: &ClusterTree) -> Vec<RankStats> {
        match self {
            Leg::Nested(c) => c.ops.rank_profile(tree),
            Leg::LowRank(b) => b.rank_profile(tree),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub eps_far: f64,
    pub eps_ver: f64,
    /// Reuse incoming pivots and operators for the outgoing side. Requires a symmetric kernel.
    pub symmetric: bool,
}

impl BuildOptions {
    pub fn new(eps: f64) -> Self {
        Self { eps_far: eps, eps_ver: eps, symmetric: false }
    }
}

/// A fast MVP representation: dense near field plus one or two compressed legs.
#[derive(Debug, Clone)]
pub struct HierRep<T: Scalar> {
    variant: Option<Variant>,
    tree: Arc<ClusterTree>,
    near_lists: PartitionLists,
    near: NearField<T>,
    legs: Vec<(LegSpec, Leg<T>)>,
}

/// Builds one of the seven variants.
pub fn build_variant<K: Kernel>(
    variant: Variant,
    tree: Arc<ClusterTree>,
    kernel: &K,
    opts: BuildOptions,
) -> Result<HierRep<K::Scalar>> {
    let (near, legs) = variant.layout(tree.dim(), opts.eps_far, opts.eps_ver);
    let mut rep = build_composite(tree, kernel, near, &legs, opts.symmetric)?;
    rep.variant = Some(variant);
    Ok(rep)
}

/// Builds an arbitrary combination of near field and legs. The caller is
/// responsible for the legs and near lists covering every block exactly once.
pub fn build_composite<K: Kernel>(
    tree: Arc<ClusterTree>,
    kernel: &K,
    near: Admissibility,
    legs: &[LegSpec],
    symmetric: bool,
) -> Result<HierRep<K::Scalar>> {
    if kernel.size() != tree.num_points() {
        return Err(Error::LengthMismatch { expected: tree.num_points(), got: kernel.size() });
    }
    if symmetric && !kernel.is_symmetric() {
        return Err(Error::InvalidParameter("symmetric mode needs a symmetric kernel".into()));
    }
    for l in legs {
        if !(l.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {}", l.eps)));
        }
    }
    let partition_for = |adm: Admissibility| PartitionLists::build(&tree, adm);
    let near_lists = partition_for(near);
    let near_field = NearField::build(&tree, &near_lists, kernel);
    let mut built = Vec::with_capacity(legs.len());
    for spec in legs {
        let partition = if spec.admissibility == near { near_lists.clone() } else { partition_for(spec.admissibility) };
        let leg = match spec.kind {
            LegKind::Nested(traversal) => {
                let lists = partition.selected(spec.selector);
                let cfg = PivotConfig { eps: spec.eps, symmetric };
                let pivots = select_pivots(&tree, &lists, traversal, kernel, cfg)?;
                let ops = build_operators(&tree, &lists, &pivots, kernel, symmetric)?;
                Leg::Nested(NestedChannel { lists, pivots, ops })
            }
            LegKind::Aca => Leg::LowRank(build_blr(&tree, &partition, spec.selector, kernel, spec.eps, false)),
        };
        built.push((*spec, leg));
    }
    Ok(HierRep { variant: None, tree, near_lists, near: near_field, legs: built })
}

impl<T: Scalar> HierRep<T> {
    pub fn variant(&self) -> Option<Variant> {
        self.variant
    }

    pub fn tree(&self) -> &Arc<ClusterTree> {
        &self.tree
    }

    pub fn size(&self) -> usize {
        self.tree.num_points()
    }

    pub fn near_field(&self) -> &NearField<T> {
        &self.near
    }

    pub fn near_lists(&self) -> &PartitionLists {
        &self.near_lists
    }

    pub fn legs(&self) -> &[(LegSpec, Leg<T>)] {
        &self.legs
    }

    fn check_len(&self, q: &[T]) -> Result<()> {
        if q.len() != self.size() {
            return Err(Error::LengthMismatch { expected: self.size(), got: q.len() });
        }
        Ok(())
    }

    /// `φ = K̃ q`, both in particle order.
    pub fn mvp(&self, q: &[T]) -> Result<Vec<T>> {
        self.check_len(q)?;
        let qs = self.tree.to_tree_order(q);
        let mut phi = vec![T::zero(); q.len()];
        for (_, leg) in &self.legs {
            leg.apply_sorted(&self.tree, &qs, &mut phi);
        }
        self.near.apply_sorted(&self.tree, &qs, &mut phi);
        Ok(self.tree.from_tree_order(&phi))
    }

    /// `K̃^H p`, both in particle order.
    pub fn mvp_adjoint(&self, p: &[T]) -> Result<Vec<T>> {
        self.check_len(p)?;
        let ps = self.tree.to_tree_order(p);
        let mut phi = vec![T::zero(); p.len()];
        for (_, leg) in &self.legs {
            leg.apply_adjoint_sorted(&self.tree, &ps, &mut phi);
        }
        self.near.apply_adjoint_sorted(&self.tree, &ps, &mut phi);
        Ok(self.tree.from_tree_order(&phi))
    }

    /// Stored scalars over all operators, factors and dense blocks.
    pub fn memory_scalars(&self) -> usize {
        self.near.scalars() + self.legs.iter().map(|(_, l)| l.memory_scalars()).sum::<usize>()
    }

    pub fn memory_bytes(&self) -> usize {
        self.memory_scalars() * T::BYTES
    }

    /// Per-leg, per-level rank summaries.
    pub fn rank_profile(&self) -> Vec<Vec<RankStats>> {
        self.legs.iter().map(|(_, l)| l.rank_profile(&self.tree)).collect()
    }

    /// Cluster pairs `(X, Y)` whose blocks this representation accounts for,
    /// including dense leaf pairs. Each block should appear exactly once.
    pub fn covered_pairs(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .tree
            .level_ids(self.tree.depth())
            .flat_map(|x| self.near_lists.near(x).iter().map(move |&y| (x, y)))
            .collect();
        for (_, leg) in &self.legs {
            match leg {
                Leg::Nested(c) => {
                    for (x, list) in c.lists.iter().enumerate() {
                        out.extend(list.iter().map(|&y| (x, y)));
                    }
                }
                Leg::LowRank(b) => out.extend(b.blocks().iter().map(|b| (b.x, b.y))),
            }
        }
        out
    }
}
