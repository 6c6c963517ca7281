//! Uniform `2^d` cluster tree.
//!
//! Clusters are stored level-major. Inside a level, a cluster's position is
//! its Z-order (morton) code, so the children of the cluster with code `m`
//! have codes `m * 2^d + c` where bit `k` of `c` selects the upper half along
//! axis `k`. Particles are permuted so that every cluster owns a contiguous
//! slice of the permutation.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};

/// Point cloud in `d <= 3` dimensions. Unused trailing coordinates are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    dim: usize,
    points: Vec<[f64; 3]>,
}

impl ParticleSet {
    pub fn new(dim: usize, points: Vec<[f64; 3]>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if points.is_empty() {
            return Err(Error::NoParticles);
        }
        let mut points = points;
        for p in &mut points {
            for x in p.iter_mut().skip(dim) {
                *x = 0.0;
            }
        }
        Ok(Self { dim, points })
    }

    /// Builds from a flat coordinate slice of length `dim * n`.
    pub fn from_flat(dim: usize, coords: &[f64]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        let points = coords
            .chunks(dim)
            .map(|c| {
                let mut p = [0.0; 3];
                p[..dim].copy_from_slice(c);
                p
            })
            .collect();
        Self::new(dim, points)
    }

    /// `n` points drawn uniformly from `[-1, 1]^dim`.
    pub fn uniform(dim: usize, n: usize, seed: u64) -> Result<Self> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n)
            .map(|_| {
                let mut p = [0.0; 3];
                for x in p.iter_mut().take(dim) {
                    *x = rng.random_range(-1.0..1.0);
                }
                p
            })
            .collect();
        Self::new(dim, points)
    }

    /// Tensor grid of first-kind Chebyshev nodes, `per_axis` nodes per axis.
    pub fn chebyshev(dim: usize, per_axis: usize) -> Result<Self> {
        let nodes: Vec<f64> = (0..per_axis)
            .map(|k| {
                (std::f64::consts::PI * (2 * k + 1) as f64 / (2 * per_axis) as f64).cos()
            })
            .collect();
        Self::tensor(dim, &nodes)
    }

    /// Cell centres of a uniform grid with `per_axis` cells per axis on `[-1, 1]^dim`.
    pub fn grid(dim: usize, per_axis: usize) -> Result<Self> {
        let h = 2.0 / per_axis as f64;
        let nodes: Vec<f64> = (0..per_axis).map(|k| -1.0 + h * (k as f64 + 0.5)).collect();
        Self::tensor(dim, &nodes)
    }

    fn tensor(dim: usize, nodes: &[f64]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let m = nodes.len();
        let n = m.pow(dim as u32);
        let points = (0..n)
            .map(|mut i| {
                let mut p = [0.0; 3];
                for x in p.iter_mut().take(dim) {
                    *x = nodes[i % m];
                    i /= m;
                }
                p
            })
            .collect();
        Self::new(dim, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64; 3] {
        &self.points[i]
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.points[i], &self.points[j]);
        let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Pairs `(i, j)`, `i < j`, of exactly coincident points.
    pub fn duplicates(&self) -> Vec<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.points[a]
                .partial_cmp(&self.points[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut out = Vec::new();
        let mut run_start = 0;
        for k in 1..=order.len() {
            if k == order.len() || self.points[order[k]] != self.points[order[run_start]] {
                for a in run_start..k {
                    for b in a + 1..k {
                        let (i, j) = (order[a], order[b]);
                        out.push((i.min(j), i.max(j)));
                    }
                }
                run_start = k;
            }
        }
        out.sort_unstable();
        out
    }
}

/// Axis-aligned hyper-cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub low: [f64; 3],
    pub side: f64,
}

impl BoundingBox {
    /// Smallest cube containing every point, centred on their bounding box.
    pub fn enclosing(points: &ParticleSet) -> Self {
        let d = points.dim();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points.points() {
            for k in 0..d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let side = (0..d).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        let side = if side > 0.0 { side } else { 1.0 };
        let mut low = [0.0; 3];
        for k in 0..d {
            low[k] = 0.5 * (lo[k] + hi[k]) - 0.5 * side;
        }
        Self { low, side }
    }

    fn contains(&self, p: &[f64; 3], dim: usize) -> bool {
        (0..dim).all(|k| p[k] >= self.low[k] && p[k] <= self.low[k] + self.side)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: usize,
    pub level: u32,
    /// Integer box coordinates in `[0, 2^level)` per axis.
    pub coords: [u32; 3],
    pub box_low: [f64; 3],
    pub box_high: [f64; 3],
    pub parent: Option<usize>,
    /// Id of the first child; the `2^d` children are consecutive.
    pub first_child: Option<usize>,
    start: usize,
    end: usize,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn is_leaf(&self) -> bool {
        self.first_child.is_none()
    }

    /// Range of this cluster in the tree permutation.
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree {
    dim: usize,
    depth: u32,
    n_max: usize,
    root_box: BoundingBox,
    clusters: Vec<Cluster>,
    level_offsets: Vec<usize>,
    perm: Vec<usize>,
}

/// Smallest `κ >= 1` with `n_max * 2^(dκ) >= n`.
pub fn tree_depth(n: usize, n_max: usize, dim: usize) -> u32 {
    let mut depth = 1u32;
    let mut cap = n_max.saturating_mul(1usize << dim);
    while cap < n {
        depth += 1;
        cap = cap.saturating_mul(1usize << dim);
    }
    depth
}

fn morton(coords: &[u32; 3], dim: usize, bits: u32) -> usize {
    let mut code = 0usize;
    for b in 0..bits {
        for (k, c) in coords.iter().enumerate().take(dim) {
            code |= (((c >> b) & 1) as usize) << (b as usize * dim + k);
        }
    }
    code
}

fn demorton(code: usize, dim: usize, bits: u32) -> [u32; 3] {
    let mut coords = [0u32; 3];
    for b in 0..bits {
        for (k, c) in coords.iter_mut().enumerate().take(dim) {
            *c |= (((code >> (b as usize * dim + k)) & 1) as u32) << b;
        }
    }
    coords
}

impl ClusterTree {
    /// Builds the tree with the depth chosen from `n_max`.
    pub fn build(points: &ParticleSet, n_max: usize, bbox: Option<BoundingBox>) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        let depth = tree_depth(points.len(), n_max, points.dim());
        Self::build_with_depth(points, depth, n_max, bbox)
    }

    /// Builds a tree of fixed depth regardless of leaf occupancy.
    pub fn build_with_depth(
        points: &ParticleSet,
        depth: u32,
        n_max: usize,
        bbox: Option<BoundingBox>,
    ) -> Result<Self> {
        let dim = points.dim();
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if points.is_empty() {
            return Err(Error::NoParticles);
        }
        if depth == 0 || depth as usize * dim > 60 {
            return Err(Error::InvalidParameter(format!("tree depth {depth}")));
        }
        let root_box = match bbox {
            Some(b) => {
                if let Some(i) = (0..points.len()).find(|&i| !b.contains(points.point(i), dim)) {
                    return Err(Error::InvalidParameter(format!(
                        "point {i} lies outside the bounding box"
                    )));
                }
                b
            }
            None => BoundingBox::enclosing(points),
        };

        let per_axis = 1u64 << depth;
        let leaf_codes: Vec<usize> = points
            .points()
            .iter()
            .map(|p| {
                let mut c = [0u32; 3];
                for k in 0..dim {
                    let t = (p[k] - root_box.low[k]) / root_box.side * per_axis as f64;
                    c[k] = (t.floor().max(0.0) as u64).min(per_axis - 1) as u32;
                }
                morton(&c, dim, depth)
            })
            .collect();
        let mut perm: Vec<usize> = (0..points.len()).collect();
        perm.sort_by_key(|&i| leaf_codes[i]);

        let n_leaves = 1usize << (dim * depth as usize);
        let mut leaf_start = vec![0usize; n_leaves + 1];
        for &c in &leaf_codes {
            leaf_start[c + 1] += 1;
        }
        for m in 0..n_leaves {
            leaf_start[m + 1] += leaf_start[m];
        }

        let mut level_offsets = Vec::with_capacity(depth as usize + 2);
        let mut total = 0usize;
        for l in 0..=depth {
            level_offsets.push(total);
            total += 1usize << (dim * l as usize);
        }
        level_offsets.push(total);

        let mut clusters = Vec::with_capacity(total);
        for l in 0..=depth {
            let count = 1usize << (dim * l as usize);
            let shift = dim * (depth - l) as usize;
            let h = root_box.side / (1u64 << l) as f64;
            for m in 0..count {
                let coords = demorton(m, dim, l);
                let mut box_low = [0.0; 3];
                let mut box_high = [0.0; 3];
                for k in 0..dim {
                    box_low[k] = root_box.low[k] + h * coords[k] as f64;
                    box_high[k] = box_low[k] + h;
                }
                clusters.push(Cluster {
                    id: level_offsets[l as usize] + m,
                    level: l,
                    coords,
                    box_low,
                    box_high,
                    parent: (l > 0).then(|| level_offsets[l as usize - 1] + (m >> dim)),
                    first_child: (l < depth)
                        .then(|| level_offsets[l as usize + 1] + (m << dim)),
                    start: leaf_start[m << shift],
                    end: leaf_start[(m + 1) << shift],
                });
            }
        }

        Ok(Self {
            dim,
            depth,
            n_max,
            root_box,
            clusters,
            level_offsets,
            perm,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Depth κ; leaves sit at level κ.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn num_points(&self) -> usize {
        self.perm.len()
    }

    pub fn root_box(&self) -> &BoundingBox {
        &self.root_box
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn cluster(&self, id: usize) -> &Cluster {
        &self.clusters[id]
    }

    pub fn level(&self, l: u32) -> &[Cluster] {
        let l = l as usize;
        &self.clusters[self.level_offsets[l]..self.level_offsets[l + 1]]
    }

    pub fn level_ids(&self, l: u32) -> std::ops::Range<usize> {
        let l = l as usize;
        self.level_offsets[l]..self.level_offsets[l + 1]
    }

    pub fn leaves(&self) -> &[Cluster] {
        self.level(self.depth)
    }

    pub fn children(&self, id: usize) -> std::ops::Range<usize> {
        match self.clusters[id].first_child {
            Some(c) => c..c + (1 << self.dim),
            None => 0..0,
        }
    }

    /// Id of the cluster at `level` with integer coordinates `coords`.
    pub fn id_at(&self, level: u32, coords: &[u32; 3]) -> usize {
        self.level_offsets[level as usize] + morton(coords, self.dim, level)
    }

    /// Global particle indices of a cluster.
    pub fn index_set(&self, id: usize) -> &[usize] {
        &self.perm[self.clusters[id].range()]
    }

    /// Tree order: `permutation()[k]` is the particle at sorted position `k`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Reorders `q` from particle order into tree order.
    pub fn to_tree_order<T: Copy>(&self, q: &[T]) -> Vec<T> {
        self.perm.iter().map(|&i| q[i]).collect()
    }

    /// Inverse of [`ClusterTree::to_tree_order`].
    pub fn from_tree_order<T: Copy>(&self, sorted: &[T]) -> Vec<T> {
        let mut out = sorted.to_vec();
        for (k, &i) in self.perm.iter().enumerate() {
            out[i] = sorted[k];
        }
        out
    }

    /// Cell side at `level`.
    pub fn side(&self, level: u32) -> f64 {
        self.root_box.side / (1u64 << level) as f64
    }
}
