//! Kernel matrices evaluated lazily entry by entry.

use crate::scalar::{Complex64, Scalar};
use crate::tree::ParticleSet;
use nalgebra::DMatrix;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Lazily evaluated square matrix `K(i, j)`.
pub trait Kernel: Sync {
    type Scalar: Scalar;

    fn size(&self) -> usize;

    fn entry(&self, i: usize, j: usize) -> Self::Scalar;

    fn is_symmetric(&self) -> bool {
        false
    }

    /// Geometry behind the indices, if any. Used to pick ACA starting rows.
    fn points(&self) -> Option<&ParticleSet> {
        None
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<Self::Scalar> {
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.entry(rows[a], cols[b]))
    }
}

impl<K: Kernel + ?Sized> Kernel for &K {
    type Scalar = K::Scalar;
    fn size(&self) -> usize {
        (**self).size()
    }
    fn entry(&self, i: usize, j: usize) -> Self::Scalar {
        (**self).entry(i, j)
    }
    fn is_symmetric(&self) -> bool {
        (**self).is_symmetric()
    }
    fn points(&self) -> Option<&ParticleSet> {
        (**self).points()
    }
}

/// Entry rule of a point-pair kernel.
pub trait PairRule: Send + Sync {
    type Scalar: Scalar;

    /// `same` is true on the matrix diagonal.
    fn value(&self, x: &[f64; 3], y: &[f64; 3], r: f64, same: bool) -> Self::Scalar;

    fn symmetric(&self) -> bool {
        true
    }
}

/// Real kernels of the benchmark zoo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RealRule {
    /// `log r`.
    Log2d { singular: f64 },
    /// `1 / r`.
    Laplace3d { singular: f64 },
    /// `exp(-r)`.
    Matern,
    /// `a / r` for `r >= a`, else `r / a`; `alpha` on the diagonal.
    Rbf2d { a: f64, alpha: f64 },
    /// `log r / log a` for `r >= a`, else `(r log r - 1) / (a log a - 1)`; `alpha` on the diagonal.
    RbfLog3d { a: f64, alpha: f64 },
    /// `(|x - y|^2 + (c(x) - c(y))^2 + 1)^{3/2}` with `c(x) = exp(-(x_0 + x_2))`, plus `shift` on the diagonal.
    NtiMultiquadric { shift: f64 },
    /// `δ_ij - w / (2π) log r`.
    Integral2d { weight: f64, singular: f64 },
    /// `δ_ij + w / (4π r)`.
    Integral3d { weight: f64, singular: f64 },
}

impl PairRule for RealRule {
    type Scalar = f64;

    #[inline]
    fn value(&self, x: &[f64; 3], y: &[f64; 3], r: f64, same: bool) -> f64 {
        match *self {
            RealRule::Log2d { singular } => {
                if r == 0.0 {
                    singular
                } else {
                    r.ln()
                }
            }
            RealRule::Laplace3d { singular } => {
                if r == 0.0 {
                    singular
                } else {
                    1.0 / r
                }
            }
            RealRule::Matern => (-r).exp(),
            RealRule::Rbf2d { a, alpha } => {
                if same {
                    alpha
                } else if r >= a {
                    a / r
                } else {
                    r / a
                }
            }
            RealRule::RbfLog3d { a, alpha } => {
                if same {
                    alpha
                } else if r >= a {
                    r.ln() / a.ln()
                } else {
                    let rlogr = if r == 0.0 { 0.0 } else { r * r.ln() };
                    (rlogr - 1.0) / (a * a.ln() - 1.0)
                }
            }
            RealRule::NtiMultiquadric { shift } => {
                let c = |p: &[f64; 3]| (-(p[0] + p[2])).exp();
                let dc = c(x) - c(y);
                let base = (r * r + dc * dc + 1.0).powf(1.5);
                if same {
                    base + shift
                } else {
                    base
                }
            }
            RealRule::Integral2d { weight, singular } => {
                let g = if r == 0.0 { singular } else { -weight / (2.0 * PI) * r.ln() };
                if same {
                    1.0 + g
                } else {
                    g
                }
            }
            RealRule::Integral3d { weight, singular } => {
                let g = if r == 0.0 { singular } else { weight / (4.0 * PI * r) };
                if same {
                    1.0 + g
                } else {
                    g
                }
            }
        }
    }
}

/// `exp(i k r) / r`, zero at `r = 0` unless overridden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Helmholtz {
    pub wavenumber: f64,
    pub singular: Complex64,
}

impl Default for Helmholtz {
    fn default() -> Self {
        Self { wavenumber: 1.0, singular: Complex64::new(0.0, 0.0) }
    }
}

impl PairRule for Helmholtz {
    type Scalar = Complex64;

    #[inline]
    fn value(&self, _x: &[f64; 3], _y: &[f64; 3], r: f64, _same: bool) -> Complex64 {
        if r == 0.0 {
            self.singular
        } else {
            let (s, c) = (self.wavenumber * r).sin_cos();
            Complex64::new(c / r, s / r)
        }
    }
}

/// Kernel matrix over a shared particle set; sources equal targets.
#[derive(Debug, Clone)]
pub struct KernelMatrix<R> {
    points: Arc<ParticleSet>,
    rule: R,
}

impl<R: PairRule> KernelMatrix<R> {
    pub fn new(points: Arc<ParticleSet>, rule: R) -> Self {
        Self { points, rule }
    }

    pub fn rule(&self) -> &R {
        &self.rule
    }

    pub fn particles(&self) -> &Arc<ParticleSet> {
        &self.points
    }
}

impl<R: PairRule> Kernel for KernelMatrix<R> {
    type Scalar = R::Scalar;

    fn size(&self) -> usize {
        self.points.len()
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> R::Scalar {
        let (x, y) = (self.points.point(i), self.points.point(j));
        self.rule.value(x, y, self.points.distance(i, j), i == j)
    }

    fn is_symmetric(&self) -> bool {
        self.rule.symmetric()
    }

    fn points(&self) -> Option<&ParticleSet> {
        Some(&self.points)
    }
}

/// Programmatic kernel from a closure over indices.
pub struct FnKernel<T, F> {
    n: usize,
    f: F,
    symmetric: bool,
    _marker: std::marker::PhantomData<fn() -> T>,
}

impl<T: Scalar, F: Fn(usize, usize) -> T + Sync> FnKernel<T, F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f, symmetric: false, _marker: std::marker::PhantomData }
    }

    pub fn symmetric(mut self, yes: bool) -> Self {
        self.symmetric = yes;
        self
    }
}

impl<T: Scalar, F: Fn(usize, usize) -> T + Sync> Kernel for FnKernel<T, F> {
    type Scalar = T;

    fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> T {
        (self.f)(i, j)
    }

    fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// Kernel identifiers accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelId {
    Log2d,
    Lap3d,
    Matern,
    Helmholtz,
    Rbf2d,
    RbfLog3d,
    NtiMq3d,
    IntEq2d,
    IntEq3d,
}

pub const RBF_RADIUS: f64 = 1e-4;

impl KernelId {
    pub const ALL: [KernelId; 9] = [
        KernelId::Log2d,
        KernelId::Lap3d,
        KernelId::Matern,
        KernelId::Helmholtz,
        KernelId::Rbf2d,
        KernelId::RbfLog3d,
        KernelId::NtiMq3d,
        KernelId::IntEq2d,
        KernelId::IntEq3d,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelId::Log2d => "log2d",
            KernelId::Lap3d => "lap3d",
            KernelId::Matern => "matern",
            KernelId::Helmholtz => "helmholtz",
            KernelId::Rbf2d => "rbf2d",
            KernelId::RbfLog3d => "rbflog3d",
            KernelId::NtiMq3d => "ntimq3d",
            KernelId::IntEq2d => "inteq2d",
            KernelId::IntEq3d => "inteq3d",
        }
    }

    pub fn is_complex(self) -> bool {
        self == KernelId::Helmholtz
    }

    /// The real entry rule for `n` points in dimension `dim`; `None` for complex kernels.
    /// `singular` overrides the value used where `r = 0` for kernels singular there.
    pub fn real_rule(self, n: usize, dim: usize, singular: Option<f64>) -> Option<RealRule> {
        let s = singular.unwrap_or(0.0);
        let n = n as f64;
        let weight = 2f64.powi(dim as i32) / n;
        Some(match self {
            KernelId::Log2d => RealRule::Log2d { singular: s },
            KernelId::Lap3d => RealRule::Laplace3d { singular: s },
            KernelId::Matern => RealRule::Matern,
            KernelId::Rbf2d => RealRule::Rbf2d { a: RBF_RADIUS, alpha: n.powf(0.25) },
            KernelId::RbfLog3d => RealRule::RbfLog3d { a: RBF_RADIUS, alpha: n.sqrt() },
            KernelId::NtiMq3d => RealRule::NtiMultiquadric { shift: n.sqrt() },
            KernelId::IntEq2d => RealRule::Integral2d { weight, singular: s },
            KernelId::IntEq3d => RealRule::Integral3d { weight, singular: s },
            KernelId::Helmholtz => return None,
        })
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        KernelId::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown kernel '{s}'"))
    }
}
