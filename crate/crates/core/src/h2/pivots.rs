//! Nested cross approximation: pivot selection by bottom-up or top-down traversal.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::lowrank::{aca_pivots, geometric_options, CrossLu};
use crate::tree::ClusterTree;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Traversal {
    /// Candidates come from the children's pivots (leaves first).
    BottomUp,
    /// Candidates are the cluster's own indices plus the parent's pivots (root first).
    TopDown,
}

/// Incoming and outgoing pivot rows/columns of one cluster, as global indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PivotQuad {
    pub t_in: Vec<usize>,
    pub s_in: Vec<usize>,
    pub t_out: Vec<usize>,
    pub s_out: Vec<usize>,
}

impl PivotQuad {
    pub fn rank_in(&self) -> usize {
        self.t_in.len()
    }

    pub fn rank_out(&self) -> usize {
        self.t_out.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotConfig {
    pub eps: f64,
    /// Mirror incoming pivots into outgoing ones instead of running a second ACA.
    /// Only valid for symmetric kernels.
    pub symmetric: bool,
}

/// ACA pivots whose cross matrix is verified to be invertible; one retry with `eps / 10`.
fn checked_pivots<K: Kernel>(
    kernel: &K,
    rows: &[usize],
    cols: &[usize],
    eps: f64,
    cluster: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    for e in [eps, eps / 10.0] {
        let opts = geometric_options(kernel, rows, cols, e);
        let (t, s) = aca_pivots(kernel, rows, cols, &opts);
        if t.is_empty() || CrossLu::new(kernel.block(&t, &s)).is_ok() {
            return Ok((t, s));
        }
    }
    Err(Error::SingularCrossMatrix { cluster: Some(cluster) })
}

fn gather<'a>(ids: impl Iterator<Item = usize>, f: impl Fn(usize) -> &'a [usize]) -> Vec<usize> {
    let mut out = Vec::new();
    for id in ids {
        out.extend_from_slice(f(id));
    }
    out
}

/// Selects a [`PivotQuad`] for every cluster. `lists[x]` is the interaction
/// list whose indices form the candidate columns of cluster `x`.
pub fn select_pivots<K: Kernel>(
    tree: &ClusterTree,
    lists: &[Vec<usize>],
    traversal: Traversal,
    kernel: &K,
    cfg: PivotConfig,
) -> Result<Vec<PivotQuad>> {
    let mut quads = vec![PivotQuad::default(); tree.num_clusters()];
    let levels: Vec<u32> = match traversal {
        Traversal::BottomUp => (1..=tree.depth()).rev().collect(),
        Traversal::TopDown => (1..=tree.depth()).collect(),
    };
    for l in levels {
        let done = &quads;
        let level: Vec<(usize, PivotQuad)> = tree
            .level_ids(l)
            .into_par_iter()
            .map(|x| {
                let q = match traversal {
                    Traversal::BottomUp => bottom_up(tree, lists, kernel, cfg, done, x),
                    Traversal::TopDown => top_down(tree, lists, kernel, cfg, done, x),
                }?;
                Ok((x, q))
            })
            .collect::<Result<_>>()?;
        for (x, q) in level {
            quads[x] = q;
        }
    }
    Ok(quads)
}

pub fn select_pivots_b2t<K: Kernel>(tree: &ClusterTree, lists: &[Vec<usize>], kernel: &K, cfg: PivotConfig) -> Result<Vec<PivotQuad>> {
    select_pivots(tree, lists, Traversal::BottomUp, kernel, cfg)
}

pub fn select_pivots_t2b<K: Kernel>(tree: &ClusterTree, lists: &[Vec<usize>], kernel: &K, cfg: PivotConfig) -> Result<Vec<PivotQuad>> {
    select_pivots(tree, lists, Traversal::TopDown, kernel, cfg)
}

fn bottom_up<K: Kernel>(
    tree: &ClusterTree,
    lists: &[Vec<usize>],
    kernel: &K,
    cfg: PivotConfig,
    quads: &[PivotQuad],
    x: usize,
) -> Result<PivotQuad> {
    let list = &lists[x];
    if list.is_empty() {
        return Ok(PivotQuad::default());
    }
    let leaf = tree.cluster(x).is_leaf();
    let (rows_in, cols_in) = if leaf {
        (tree.index_set(x).to_vec(), gather(list.iter().copied(), |y| tree.index_set(y)))
    } else {
        (
            gather(tree.children(x), |c| &quads[c].t_in),
            gather(list.iter().flat_map(|&y| tree.children(y)), |c| &quads[c].s_out),
        )
    };
    let (t_in, s_in) = checked_pivots(kernel, &rows_in, &cols_in, cfg.eps, x)?;
    if cfg.symmetric {
        return Ok(PivotQuad { t_out: s_in.clone(), s_out: t_in.clone(), t_in, s_in });
    }
    let (rows_out, cols_out) = if leaf {
        (gather(list.iter().copied(), |y| tree.index_set(y)), tree.index_set(x).to_vec())
    } else {
        (
            gather(list.iter().flat_map(|&y| tree.children(y)), |c| &quads[c].t_in),
            gather(tree.children(x), |c| &quads[c].s_out),
        )
    };
    let (t_out, s_out) = checked_pivots(kernel, &rows_out, &cols_out, cfg.eps, x)?;
    Ok(PivotQuad { t_in, s_in, t_out, s_out })
}

fn top_down<K: Kernel>(
    tree: &ClusterTree,
    lists: &[Vec<usize>],
    kernel: &K,
    cfg: PivotConfig,
    quads: &[PivotQuad],
    x: usize,
) -> Result<PivotQuad> {
    let own = tree.index_set(x);
    if own.is_empty() {
        return Ok(PivotQuad::default());
    }
    let parent = tree.cluster(x).parent.map(|p| &quads[p]);
    let list = &lists[x];
    let mut cols_in = gather(list.iter().copied(), |y| tree.index_set(y));
    if let Some(p) = parent {
        cols_in.extend_from_slice(&p.s_in);
    }
    let (t_in, s_in) = checked_pivots(kernel, own, &cols_in, cfg.eps, x)?;
    if cfg.symmetric {
        return Ok(PivotQuad { t_out: s_in.clone(), s_out: t_in.clone(), t_in, s_in });
    }
    let mut rows_out = gather(list.iter().copied(), |y| tree.index_set(y));
    if let Some(p) = parent {
        rows_out.extend_from_slice(&p.t_out);
    }
    let (t_out, s_out) = checked_pivots(kernel, &rows_out, own, cfg.eps, x)?;
    Ok(PivotQuad { t_in, s_in, t_out, s_out })
}
