//! Strong and weak admissibility lists.
//!
//! All classification uses integer box coordinates. Under the weak rule two
//! same-level boxes are admissible when they share at most a vertex; the
//! interaction list is split into its far part and its vertex-sharing part.

use crate::error::{Error, Result};
use crate::tree::ClusterTree;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Admissibility {
    /// `min(diam X, diam Y) <= eta * dist(X, Y)`.
    Strong { eta: f64 },
    WeakVertex,
}

impl Admissibility {
    /// Strong admissibility with `eta = sqrt(d)`.
    pub fn strong(dim: usize) -> Self {
        Admissibility::Strong { eta: (dim as f64).sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairClass {
    Far,
    /// Boxes touch along a shared face of the given dimension (0 = vertex).
    SharesSurface(usize),
    Identical,
}

/// Which part of an interaction list to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListSelector {
    Far,
    Vertex,
    All,
}

fn classify_coords(a: &[u32; 3], b: &[u32; 3], dim: usize) -> PairClass {
    let mut equal = 0;
    for k in 0..dim {
        match a[k].abs_diff(b[k]) {
            0 => equal += 1,
            1 => {}
            _ => return PairClass::Far,
        }
    }
    if equal == dim {
        PairClass::Identical
    } else {
        PairClass::SharesSurface(equal)
    }
}

pub fn classify_pair(tree: &ClusterTree, x: usize, y: usize) -> Result<PairClass> {
    let (cx, cy) = (tree.cluster(x), tree.cluster(y));
    if cx.level != cy.level {
        return Err(Error::LevelMismatch(cx.level, cy.level));
    }
    Ok(classify_coords(&cx.coords, &cy.coords, tree.dim()))
}

/// Squared gap between two same-level boxes, in units of the box side.
fn gap2(a: &[u32; 3], b: &[u32; 3], dim: usize) -> u64 {
    (0..dim)
        .map(|k| {
            let g = a[k].abs_diff(b[k]).saturating_sub(1) as u64;
            g * g
        })
        .sum()
}

fn strong_admissible(a: &[u32; 3], b: &[u32; 3], dim: usize, eta: f64) -> bool {
    let g2 = gap2(a, b, dim);
    // Relative slack so that eta = sqrt(d) is not lost to rounding of eta^2.
    g2 > 0 && (dim as f64) <= eta * eta * g2 as f64 * (1.0 + 1e-12)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterLists {
    pub il_far: Vec<usize>,
    pub il_ver: Vec<usize>,
    /// Inadmissible same-level clusters, including the cluster itself.
    pub near: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionLists {
    kind: Admissibility,
    lists: Vec<ClusterLists>,
}

/// Siblings of `id` plus the children of its parent's surface-sharing neighbours.
pub fn clan(tree: &ClusterTree, id: usize) -> Vec<usize> {
    let c = tree.cluster(id);
    let Some(parent) = c.parent else {
        return Vec::new();
    };
    let pl = tree.cluster(parent).level;
    let mut out: Vec<usize> = tree
        .level(pl)
        .iter()
        .filter(|p| {
            matches!(
                classify_coords(&p.coords, &tree.cluster(parent).coords, tree.dim()),
                PairClass::Identical | PairClass::SharesSurface(1..)
            )
        })
        .flat_map(|p| tree.children(p.id))
        .filter(|&y| y != id)
        .collect();
    out.sort_unstable();
    out
}

impl PartitionLists {
    pub fn build(tree: &ClusterTree, kind: Admissibility) -> Self {
        let dim = tree.dim();
        let mut lists = vec![ClusterLists::default(); tree.num_clusters()];
        lists[0].near.push(0);
        for l in 1..=tree.depth() {
            for c in tree.level(l) {
                let parent = c.parent.expect("non-root cluster has a parent");
                let mut entry = ClusterLists::default();
                let candidates: Vec<usize> = lists[parent]
                    .near
                    .iter()
                    .flat_map(|&p| tree.children(p))
                    .collect();
                for y in candidates {
                    let cy = &tree.cluster(y).coords;
                    let class = classify_coords(&c.coords, cy, dim);
                    match kind {
                        Admissibility::Strong { eta } => {
                            if class == PairClass::Identical || !strong_admissible(&c.coords, cy, dim, eta) {
                                entry.near.push(y);
                            } else {
                                entry.il_far.push(y);
                            }
                        }
                        Admissibility::WeakVertex => match class {
                            PairClass::Identical | PairClass::SharesSurface(1..) => entry.near.push(y),
                            PairClass::SharesSurface(0) => entry.il_ver.push(y),
                            PairClass::Far => entry.il_far.push(y),
                        },
                    }
                }
                entry.il_far.sort_unstable();
                entry.il_ver.sort_unstable();
                entry.near.sort_unstable();
                lists[c.id] = entry;
            }
        }
        Self { kind, lists }
    }

    pub fn kind(&self) -> Admissibility {
        self.kind
    }

    pub fn lists(&self, id: usize) -> &ClusterLists {
        &self.lists[id]
    }

    pub fn il_far(&self, id: usize) -> &[usize] {
        &self.lists[id].il_far
    }

    pub fn il_ver(&self, id: usize) -> &[usize] {
        &self.lists[id].il_ver
    }

    pub fn near(&self, id: usize) -> &[usize] {
        &self.lists[id].near
    }

    /// Far and vertex-sharing members merged in ascending order.
    pub fn interactions(&self, id: usize) -> Vec<usize> {
        self.select(id, ListSelector::All)
    }

    pub fn select(&self, id: usize, sel: ListSelector) -> Vec<usize> {
        let l = &self.lists[id];
        match sel {
            ListSelector::Far => l.il_far.clone(),
            ListSelector::Vertex => l.il_ver.clone(),
            ListSelector::All => {
                let mut v: Vec<usize> = l.il_far.iter().chain(&l.il_ver).copied().collect();
                v.sort_unstable();
                v
            }
        }
    }

    /// One list per cluster id.
    pub fn selected(&self, sel: ListSelector) -> Vec<Vec<usize>> {
        (0..self.lists.len()).map(|id| self.select(id, sel)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{BoundingBox, ParticleSet};
    use proptest::prelude::*;

    fn full_tree(dim: usize, depth: u32) -> ClusterTree {
        // One point per leaf box so the tree geometry does not depend on sampling.
        let per_axis = 1usize << depth;
        let pts = ParticleSet::grid(dim, per_axis).unwrap();
        let bbox = BoundingBox { low: [-1.0; 3], side: 2.0 };
        ClusterTree::build_with_depth(&pts, depth, 1, Some(bbox)).unwrap()
    }

    fn interior(tree: &ClusterTree, level: u32) -> usize {
        let mid = 1u32 << (level - 1);
        tree.id_at(level, &[mid, mid, mid])
    }

    #[test]
    fn classify_examples() {
        let tree = full_tree(2, 2);
        let a = tree.id_at(2, &[1, 1, 0]);
        assert_eq!(classify_pair(&tree, a, tree.id_at(2, &[2, 2, 0])).unwrap(), PairClass::SharesSurface(0));
        assert_eq!(classify_pair(&tree, a, tree.id_at(2, &[1, 2, 0])).unwrap(), PairClass::SharesSurface(1));
        assert_eq!(classify_pair(&tree, a, tree.id_at(2, &[3, 1, 0])).unwrap(), PairClass::Far);
        assert_eq!(classify_pair(&tree, a, a).unwrap(), PairClass::Identical);
        assert_eq!(classify_pair(&tree, a, 0), Err(Error::LevelMismatch(2, 0)));
        let t3 = full_tree(3, 1);
        assert_eq!(
            classify_pair(&t3, t3.id_at(1, &[0, 0, 0]), t3.id_at(1, &[0, 1, 0])).unwrap(),
            PairClass::SharesSurface(2)
        );
    }

    #[test]
    fn interior_counts_2d() {
        let tree = full_tree(2, 3);
        let p = PartitionLists::build(&tree, Admissibility::WeakVertex);
        let c = interior(&tree, 3);
        assert_eq!(p.near(c).len(), 5);
        assert_eq!(p.il_ver(c).len(), 3);
        assert_eq!(p.il_far(c).len(), 12);
        let mut edge = 0;
        for y in tree.level_ids(3) {
            if let PairClass::SharesSurface(1) = classify_pair(&tree, c, y).unwrap() {
                edge += 1;
            }
        }
        assert_eq!(edge, 4);
        let s = PartitionLists::build(&tree, Admissibility::strong(2));
        assert_eq!(s.near(c).len(), 9);
        assert!(s.il_far(c).len() <= 27);
        assert_eq!(s.il_far(c).len(), 27);
    }

    #[test]
    fn interior_counts_3d() {
        let tree = full_tree(3, 3);
        let p = PartitionLists::build(&tree, Admissibility::WeakVertex);
        let c = interior(&tree, 3);
        assert_eq!(p.near(c).len(), 19);
        assert_eq!(p.il_ver(c).len(), 7);
        assert_eq!(p.il_far(c).len(), 126);
        assert_eq!(p.interactions(c).len(), 133);
    }

    #[test]
    fn level_one_has_only_vertex_interactions() {
        for dim in 1..=3 {
            let tree = full_tree(dim, 2);
            let p = PartitionLists::build(&tree, Admissibility::WeakVertex);
            assert!(p.interactions(0).is_empty());
            for id in tree.level_ids(1) {
                assert!(p.il_far(id).is_empty());
                assert_eq!(p.il_ver(id).len(), 1);
            }
            let s = PartitionLists::build(&tree, Admissibility::strong(dim));
            for id in tree.level_ids(1) {
                assert!(s.il_far(id).is_empty());
            }
        }
    }

    #[test]
    fn clan_matches_interaction_pool() {
        let tree = full_tree(2, 3);
        let p = PartitionLists::build(&tree, Admissibility::WeakVertex);
        for id in tree.level_ids(3) {
            let clan = clan(&tree, id);
            for y in p.interactions(id) {
                assert!(clan.contains(&y));
            }
        }
        assert_eq!(clan(&tree, interior(&tree, 3)).len(), 19);
    }

    /// Each leaf pair must be covered exactly once by a near block or an
    /// interaction at some ancestor level.
    fn coverage(tree: &ClusterTree, p: &PartitionLists) -> bool {
        let depth = tree.depth();
        let leaves = tree.level_ids(depth);
        let n = leaves.len();
        let mut count = vec![0u8; n * n];
        let leaf_range = |id: usize| {
            let c = tree.cluster(id);
            let m = id - tree.level_ids(c.level).start;
            let shift = tree.dim() * (depth - c.level) as usize;
            (m << shift)..((m + 1) << shift)
        };
        for a in 0..tree.num_clusters() {
            for b in p.interactions(a) {
                for x in leaf_range(a) {
                    for y in leaf_range(b) {
                        count[x * n + y] += 1;
                    }
                }
            }
        }
        for x in leaves.clone() {
            for &y in p.near(x) {
                count[(x - leaves.start) * n + (y - leaves.start)] += 1;
            }
        }
        count.iter().all(|&c| c == 1)
    }

    fn check_lists(tree: &ClusterTree, p: &PartitionLists, strong: bool) -> std::result::Result<(), TestCaseError> {
        let d = tree.dim() as u32;
        for c in tree.clusters() {
            let l = p.lists(c.id);
            let all: Vec<usize> = l.il_far.iter().chain(&l.il_ver).chain(&l.near).copied().collect();
            let mut dedup = all.clone();
            dedup.sort_unstable();
            dedup.dedup();
            prop_assert_eq!(dedup.len(), all.len());
            for &y in &all {
                prop_assert_eq!(tree.cluster(y).level, c.level);
            }
            for &y in &l.near {
                prop_assert!(p.near(y).contains(&c.id));
            }
            for y in p.interactions(c.id) {
                prop_assert!(p.interactions(y).contains(&c.id));
            }
            if strong {
                prop_assert!(l.near.len() <= 3usize.pow(d));
                prop_assert!(l.il_far.len() <= 6usize.pow(d) - 3usize.pow(d));
                prop_assert!(l.il_ver.is_empty());
                for &y in &l.il_far {
                    let g2 = gap2(&c.coords, &tree.cluster(y).coords, tree.dim());
                    // diam <= sqrt(d) dist with both measured in box sides.
                    prop_assert!(d as f64 <= d as f64 * g2 as f64);
                }
            } else {
                prop_assert!(l.near.len() <= 3usize.pow(d) - 2usize.pow(d));
                prop_assert!(l.il_far.len() + l.il_ver.len()
                    <= 6usize.pow(d) + 2usize.pow(d) - 4usize.pow(d) - 3usize.pow(d));
                prop_assert!(l.il_ver.len() < 2usize.pow(d));
                let clan = clan(tree, c.id);
                for y in p.interactions(c.id) {
                    prop_assert!(clan.contains(&y));
                }
            }
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn invariants_hold(dim in 1usize..=3, n in 1usize..512, n_max in 2usize..30, seed in 0u64..500) {
            let pts = ParticleSet::uniform(dim, n, seed).unwrap();
            let tree = ClusterTree::build(&pts, n_max, None).unwrap();
            prop_assume!(tree.num_clusters() <= 5000);
            let weak = PartitionLists::build(&tree, Admissibility::WeakVertex);
            check_lists(&tree, &weak, false)?;
            prop_assert!(coverage(&tree, &weak));
            let strong = PartitionLists::build(&tree, Admissibility::strong(dim));
            check_lists(&tree, &strong, true)?;
            prop_assert!(coverage(&tree, &strong));
        }
    }

    #[test]
    fn coverage_on_full_trees() {
        for (dim, depth) in [(1, 5), (2, 3), (3, 2)] {
            let tree = full_tree(dim, depth);
            for kind in [Admissibility::WeakVertex, Admissibility::strong(dim)] {
                assert!(coverage(&tree, &PartitionLists::build(&tree, kind)));
            }
        }
    }
}
