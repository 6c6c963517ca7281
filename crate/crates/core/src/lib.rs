//! Hierarchical kernel matrices on uniform `2^d` trees.
//!
//! The crate builds fast matrix-vector products for dense kernel matrices
//! `K(x_i, x_j)` using either nested bases obtained by nested cross
//! approximation (H2) or independent per-block ACA factors (H). Both strong
//! (`η = √d`) and weak (vertex-sharing) admissibility are supported.

pub mod dense;
pub mod error;
pub mod h2;
pub mod hmatrix;
pub mod kernels;
pub mod lowrank;
pub mod oracle;
pub mod partition;
pub mod scalar;
pub mod solver;
pub mod tree;

pub use error::{Error, Result};
pub use h2::{build_composite, build_variant, BuildOptions, HierRep, LegKind, LegSpec, Traversal, Variant};
pub use hmatrix::{build_blr, BlockLowRankRep, LowRankBlock, NearField, RankStats};
pub use kernels::{FnKernel, Helmholtz, Kernel, KernelId, KernelMatrix, PairRule, RealRule};
pub use partition::{classify_pair, Admissibility, ListSelector, PairClass, PartitionLists};
pub use scalar::{Complex64, Scalar};
pub use tree::{BoundingBox, Cluster, ClusterTree, ParticleSet};
