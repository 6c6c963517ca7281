//! Experiment driver behind the `h2weak` binary.
//!
//! An [`ExperimentSpec`] names a task, a kernel, a point distribution and a
//! sweep over sizes and variants; [`run_experiment`] turns it into
//! [`ResultRow`]s which [`write_csv`] serialises under a fixed header.

use h2weak_core::oracle::{relative_two_norm_error, DenseOracle};
use h2weak_core::scalar::{norm2, random_vector, relative_error};
use h2weak_core::solver::{gmres, GmresConfig};
use h2weak_core::{
    build_composite, build_variant, Admissibility, BuildOptions, ClusterTree, Helmholtz, HierRep, Kernel,
    KernelId, KernelMatrix, LegKind, LegSpec, ListSelector, ParticleSet, RankStats, Scalar, Traversal, Variant,
};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

pub const CSV_HEADER: [&str; 23] = [
    "experiment", "task", "variant", "kernel", "dim", "N", "nmax", "dist", "eps", "eps_far", "eps_ver", "seed",
    "kappa", "init_s", "mvp_s", "direct_s", "mem_scalars", "re_mvp", "gmres_iters", "re_sol", "rank_max",
    "rank_min", "rank_avg",
];

pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// Above this size the dense 2-norm estimate streams entries instead of
/// holding the matrix.
const ASSEMBLE_CAP: usize = 12_000;

const NORM_ITERS: usize = 30;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure")]
    Numerical(#[from] h2weak_core::Error),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 1,
            BenchError::Numerical(_) => 2,
        }
    }
}

fn config(msg: impl Into<String>) -> BenchError {
    BenchError::Config(msg.into())
}

macro_rules! named_enum {
    ($name:ident { $($variant:ident => $s:literal),* $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name { $($variant),* }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $s),* }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($s => Ok($name::$variant),)*
                    _ => Err(format!("unknown {} '{s}'", stringify!($name).to_lowercase())),
                }
            }
        }
    };
}

named_enum!(Task { Mvp => "mvp", Gmres => "gmres", RankProfile => "rankprofile", NegControl => "negcontrol" });
named_enum!(Distribution { Uniform => "uniform", Chebyshev => "chebyshev", Grid => "grid" });

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub task: Task,
    pub kernel: KernelId,
    pub dim: usize,
    pub sizes: Vec<usize>,
    /// Defaults to 100 in 2D and 125 in 3D.
    pub n_max: Option<usize>,
    pub dist: Distribution,
    pub eps: f64,
    pub eps_far: Option<f64>,
    pub eps_ver: Option<f64>,
    pub variants: Vec<Variant>,
    pub seed: u64,
    pub trials: usize,
    pub dense_cap: usize,
    /// Value used where `r = 0`; negcontrol defaults to 1.
    pub singular_value: Option<f64>,
    pub gmres_tol: f64,
    pub symmetric: bool,
}

impl ExperimentSpec {
    pub fn new(task: Task, kernel: KernelId, dim: usize, sizes: Vec<usize>, eps: f64) -> Self {
        Self {
            name: task.as_str().to_string(),
            task,
            kernel,
            dim,
            sizes,
            n_max: None,
            dist: Distribution::Uniform,
            eps,
            eps_far: None,
            eps_ver: None,
            variants: vec![Variant::H2StarBT],
            seed: 42,
            trials: 5,
            dense_cap: DEFAULT_DENSE_CAP,
            singular_value: None,
            gmres_tol: 1e-12,
            symmetric: false,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max.unwrap_or(if self.dim == 3 { 125 } else { 100 })
    }

    pub fn eps_far(&self) -> f64 {
        self.eps_far.unwrap_or(self.eps)
    }

    pub fn eps_ver(&self) -> f64 {
        self.eps_ver.unwrap_or(self.eps)
    }

    fn singular(&self) -> Option<f64> {
        match (self.singular_value, self.task) {
            (None, Task::NegControl) => Some(1.0),
            (s, _) => s,
        }
    }

    fn validate(&self) -> Result<(), BenchError> {
        if !(1..=3).contains(&self.dim) {
            return Err(config(format!("dimension {} outside 1..=3", self.dim)));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(config("at least one positive N is required"));
        }
        for (what, e) in [("eps", self.eps), ("eps-far", self.eps_far()), ("eps-ver", self.eps_ver()), ("gmres-tol", self.gmres_tol)] {
            if !(e > 0.0 && e.is_finite()) {
                return Err(config(format!("{what} must be positive, got {e}")));
            }
        }
        if self.trials == 0 {
            return Err(config("trials must be at least 1"));
        }
        if self.n_max() == 0 {
            return Err(config("nmax must be positive"));
        }
        if self.variants.is_empty() && self.task != Task::NegControl {
            return Err(config("no variant given"));
        }
        if self.task == Task::NegControl && self.kernel.is_complex() {
            return Err(config("negcontrol needs a real kernel"));
        }
        Ok(())
    }
}

/// One measured configuration. Fields beyond the CSV columns are reported on stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub task: Task,
    pub variant: String,
    pub kernel: KernelId,
    pub dim: usize,
    pub n: usize,
    pub n_max: usize,
    pub dist: Distribution,
    pub eps: f64,
    pub eps_far: f64,
    pub eps_ver: f64,
    pub seed: u64,
    pub kappa: u32,
    pub init_s: f64,
    pub mvp_s: f64,
    pub mvp_best_s: f64,
    pub direct_s: Option<f64>,
    pub mem_scalars: usize,
    pub mem_bytes: usize,
    pub re_mvp: Option<f64>,
    pub gmres_iters: Option<usize>,
    pub gmres_converged: Option<bool>,
    pub re_sol: Option<f64>,
    pub residuals: Vec<f64>,
    pub rank_max: usize,
    pub rank_min: usize,
    pub rank_avg: f64,
    pub warning: Option<String>,
}

impl ResultRow {
    fn record(&self) -> Vec<String> {
        let opt = |x: Option<String>| x.unwrap_or_default();
        vec![
            self.experiment.clone(),
            self.task.to_string(),
            self.variant.clone(),
            self.kernel.to_string(),
            self.dim.to_string(),
            self.n.to_string(),
            self.n_max.to_string(),
            self.dist.to_string(),
            format!("{:e}", self.eps),
            format!("{:e}", self.eps_far),
            format!("{:e}", self.eps_ver),
            self.seed.to_string(),
            self.kappa.to_string(),
            format!("{:.6}", self.init_s),
            format!("{:.6}", self.mvp_s),
            opt(self.direct_s.map(|t| format!("{t:.6}"))),
            self.mem_scalars.to_string(),
            opt(self.re_mvp.map(|e| format!("{e:.6e}"))),
            opt(self.gmres_iters.map(|i| i.to_string())),
            opt(self.re_sol.map(|e| format!("{e:.6e}"))),
            self.rank_max.to_string(),
            self.rank_min.to_string(),
            format!("{:.3}", self.rank_avg),
        ]
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn particles(dist: Distribution, dim: usize, n: usize, seed: u64) -> Result<ParticleSet, BenchError> {
    let per_axis = || {
        let m = (n as f64).powf(1.0 / dim as f64).round() as usize;
        if m.pow(dim as u32) == n {
            Ok(m)
        } else {
            Err(config(format!("{dist} needs N to be a perfect {dim}-th power, got {n}")))
        }
    };
    Ok(match dist {
        Distribution::Uniform => ParticleSet::uniform(dim, n, seed)?,
        Distribution::Chebyshev => ParticleSet::chebyshev(dim, per_axis()?)?,
        Distribution::Grid => ParticleSet::grid(dim, per_axis()?)?,
    })
}

/// Runs every (N, variant) combination of `spec`, in that nesting order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, BenchError> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &n in &spec.sizes {
        let pts = Arc::new(particles(spec.dist, spec.dim, n, spec.seed)?);
        let tree = Arc::new(ClusterTree::build(&pts, spec.n_max(), None)?);
        if spec.kernel.is_complex() {
            let k = KernelMatrix::new(
                pts.clone(),
                Helmholtz { singular: spec.singular().unwrap_or(0.0).into(), ..Helmholtz::default() },
            );
            rows.extend(run_size(spec, &tree, &k)?);
        } else {
            let rule = spec.kernel.real_rule(n, spec.dim, spec.singular()).expect("real kernel");
            rows.extend(run_size(spec, &tree, &KernelMatrix::new(pts.clone(), rule))?);
        }
    }
    Ok(rows)
}

fn run_size<K: Kernel>(spec: &ExperimentSpec, tree: &Arc<ClusterTree>, k: &K) -> Result<Vec<ResultRow>, BenchError> {
    if spec.task == Task::NegControl {
        return negcontrol(spec, tree, k);
    }
    let mut rows = Vec::new();
    for &v in &spec.variants {
        let opts = BuildOptions { eps_far: spec.eps_far(), eps_ver: spec.eps_ver(), symmetric: spec.symmetric };
        let t = Instant::now();
        let rep = build_variant(v, tree.clone(), k, opts)?;
        let init_s = t.elapsed().as_secs_f64();
        let base = base_row(spec, tree, v.as_str(), init_s, &rep);
        match spec.task {
            Task::Mvp => rows.push(mvp_task(spec, k, &rep, base)),
            Task::Gmres => rows.push(gmres_task(spec, tree, k, v, &rep, base)?),
            Task::RankProfile => rows.extend(rank_rows(&rep, base)),
            Task::NegControl => unreachable!(),
        }
    }
    Ok(rows)
}

fn base_row<T: Scalar>(spec: &ExperimentSpec, tree: &ClusterTree, variant: &str, init_s: f64, rep: &HierRep<T>) -> ResultRow {
    let (rank_max, rank_min, rank_avg) = aggregate(rep.rank_profile().iter().flatten());
    ResultRow {
        experiment: spec.name.clone(),
        task: spec.task,
        variant: variant.to_string(),
        kernel: spec.kernel,
        dim: spec.dim,
        n: tree.num_points(),
        n_max: spec.n_max(),
        dist: spec.dist,
        eps: spec.eps,
        eps_far: spec.eps_far(),
        eps_ver: spec.eps_ver(),
        seed: spec.seed,
        kappa: tree.depth(),
        init_s,
        mvp_s: 0.0,
        mvp_best_s: 0.0,
        direct_s: None,
        mem_scalars: rep.memory_scalars(),
        mem_bytes: rep.memory_bytes(),
        re_mvp: None,
        gmres_iters: None,
        gmres_converged: None,
        re_sol: None,
        residuals: Vec::new(),
        rank_max,
        rank_min,
        rank_avg,
        warning: None,
    }
}

/// Max, min and count-weighted mean over several rank summaries.
pub fn aggregate<'a>(stats: impl Iterator<Item = &'a RankStats>) -> (usize, usize, f64) {
    let (mut max, mut min, mut sum, mut count) = (0, usize::MAX, 0.0, 0usize);
    for s in stats.filter(|s| s.count > 0) {
        max = max.max(s.max);
        min = min.min(s.min);
        sum += s.avg * s.count as f64;
        count += s.count;
    }
    if count == 0 {
        (0, 0, 0.0)
    } else {
        (max, min, sum / count as f64)
    }
}

fn dense_warning(spec: &ExperimentSpec, n: usize) -> String {
    format!("N={n} exceeds dense cap {}; dense comparison skipped", spec.dense_cap)
}

fn mvp_task<K: Kernel>(spec: &ExperimentSpec, k: &K, rep: &HierRep<K::Scalar>, mut row: ResultRow) -> ResultRow {
    let n = k.size();
    let dense = (n <= spec.dense_cap).then(|| DenseOracle::lazy(k));
    let (mut total, mut best, mut direct, mut worst) = (0.0, f64::INFINITY, 0.0, 0.0f64);
    for t in 0..spec.trials {
        let q: Vec<K::Scalar> = random_vector(n, spec.seed.wrapping_add(1 + t as u64));
        let start = Instant::now();
        let phi = rep.mvp(&q).expect("length checked");
        let dt = start.elapsed().as_secs_f64();
        total += dt;
        best = best.min(dt);
        if let Some(o) = &dense {
            let start = Instant::now();
            let exact = o.mvp(&q);
            direct += start.elapsed().as_secs_f64();
            worst = worst.max(relative_error(&phi, &exact));
        }
    }
    let trials = spec.trials as f64;
    row.mvp_s = total / trials;
    row.mvp_best_s = best;
    if dense.is_some() {
        row.direct_s = Some(direct / trials);
        row.re_mvp = Some(worst);
    } else {
        row.warning = Some(dense_warning(spec, n));
    }
    row
}

/// Manufactured-solution solve: `b = K q`, then compare the GMRES solution with `q`.
/// Above the dense cap `b` comes from a representation built at `eps / 100`.
fn gmres_task<K: Kernel>(
    spec: &ExperimentSpec,
    tree: &Arc<ClusterTree>,
    k: &K,
    v: Variant,
    rep: &HierRep<K::Scalar>,
    mut row: ResultRow,
) -> Result<ResultRow, BenchError> {
    let n = k.size();
    let q: Vec<K::Scalar> = random_vector(n, spec.seed.wrapping_add(1));
    let start = Instant::now();
    let phi = rep.mvp(&q)?;
    row.mvp_s = start.elapsed().as_secs_f64();
    row.mvp_best_s = row.mvp_s;
    let b = if n <= spec.dense_cap {
        let start = Instant::now();
        let b = DenseOracle::lazy(k).mvp(&q);
        row.direct_s = Some(start.elapsed().as_secs_f64());
        row.re_mvp = Some(relative_error(&phi, &b));
        b
    } else {
        row.warning = Some(dense_warning(spec, n));
        let tight = BuildOptions { eps_far: spec.eps_far() / 100.0, eps_ver: spec.eps_ver() / 100.0, symmetric: spec.symmetric };
        build_variant(v, tree.clone(), k, tight)?.mvp(&q)?
    };
    let cfg = GmresConfig { record_residuals: true, ..GmresConfig::new(spec.gmres_tol) };
    let report = gmres(rep, &b, cfg)?;
    let diff: Vec<K::Scalar> = report.solution.iter().zip(&q).map(|(x, y)| *x - *y).collect();
    row.gmres_iters = Some(report.iterations);
    row.gmres_converged = Some(report.converged);
    row.re_sol = Some(norm2(&diff) / norm2(&q));
    row.residuals = report.residuals;
    Ok(row)
}

fn rank_rows<T: Scalar>(rep: &HierRep<T>, base: ResultRow) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for (j, levels) in rep.rank_profile().iter().enumerate() {
        for s in levels {
            let mut row = base.clone();
            row.experiment = format!("{}/leg{j}/L{}", base.experiment, s.level);
            (row.rank_max, row.rank_min, row.rank_avg) = (s.max, s.min, s.avg);
            rows.push(row);
        }
    }
    rows
}

/// Nested bases over the whole weak interaction list, built once bottom-up
/// and once top-down. `re_mvp` holds the relative 2-norm error.
fn negcontrol<K: Kernel>(spec: &ExperimentSpec, tree: &Arc<ClusterTree>, k: &K) -> Result<Vec<ResultRow>, BenchError> {
    let n = k.size();
    let dense = (n <= spec.dense_cap).then(|| {
        if n <= ASSEMBLE_CAP {
            DenseOracle::assembled(k)
        } else {
            DenseOracle::lazy(k)
        }
    });
    let mut rows = Vec::new();
    for (label, t) in [("b2t-full", Traversal::BottomUp), ("t2b-full", Traversal::TopDown)] {
        let leg = LegSpec {
            admissibility: Admissibility::WeakVertex,
            selector: ListSelector::All,
            kind: LegKind::Nested(t),
            eps: spec.eps,
        };
        let start = Instant::now();
        let rep = build_composite(tree.clone(), k, Admissibility::WeakVertex, &[leg], spec.symmetric)?;
        let init_s = start.elapsed().as_secs_f64();
        let mut row = base_row(spec, tree, label, init_s, &rep);
        let profile = rep.rank_profile();
        if let Some(leaf) = profile[0].iter().find(|s| s.level == tree.depth()) {
            (row.rank_max, row.rank_min, row.rank_avg) = (leaf.max, leaf.min, leaf.avg);
        }
        let q: Vec<K::Scalar> = random_vector(n, spec.seed.wrapping_add(1));
        let start = Instant::now();
        rep.mvp(&q)?;
        row.mvp_s = start.elapsed().as_secs_f64();
        row.mvp_best_s = row.mvp_s;
        match &dense {
            Some(o) => {
                row.re_mvp = Some(relative_two_norm_error(
                    n,
                    |x| o.mvp(x),
                    |x| o.mvp_adjoint(x),
                    |x| rep.mvp(x).expect("length checked"),
                    |x| rep.mvp_adjoint(x).expect("length checked"),
                    NORM_ITERS,
                ));
            }
            None => row.warning = Some(dense_warning(spec, n)),
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(task: Task) -> ExperimentSpec {
        let mut s = ExperimentSpec::new(task, KernelId::Log2d, 2, vec![900], 1e-8);
        s.n_max = Some(40);
        s.trials = 2;
        s
    }

    #[test]
    fn header_is_fixed() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "experiment,task,variant,kernel,dim,N,nmax,dist,eps,eps_far,eps_ver,seed,kappa,init_s,mvp_s,direct_s,mem_scalars,re_mvp,gmres_iters,re_sol,rank_max,rank_min,rank_avg\n"
        );
    }

    #[test]
    fn mvp_rows_are_deterministic() {
        let mut s = small(Task::Mvp);
        s.variants = vec![Variant::H2StarBT, Variant::HStd];
        let a = run_experiment(&s).unwrap();
        let b = run_experiment(&s).unwrap();
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.re_mvp, y.re_mvp);
            assert_eq!(x.mem_scalars, y.mem_scalars);
            assert_eq!((x.rank_max, x.rank_min), (y.rank_max, y.rank_min));
            assert!(x.re_mvp.unwrap() <= 1e-6);
            assert_eq!(x.mem_bytes, 8 * x.mem_scalars);
            assert!(x.mvp_best_s <= x.mvp_s);
        }
    }

    #[test]
    fn dense_cap_omits_error() {
        let mut s = small(Task::Mvp);
        s.dense_cap = 100;
        let row = &run_experiment(&s).unwrap()[0];
        assert!(row.re_mvp.is_none() && row.direct_s.is_none() && row.warning.is_some());
        let mut buf = Vec::new();
        write_csv(&mut buf, std::slice::from_ref(row)).unwrap();
        let line = String::from_utf8(buf).unwrap().lines().nth(1).unwrap().to_string();
        assert_eq!(line.split(',').nth(17), Some(""));
    }

    #[test]
    fn gmres_task_reports_solution_error() {
        let mut s = small(Task::Gmres);
        s.kernel = KernelId::IntEq2d;
        s.dist = Distribution::Grid;
        s.eps = 1e-10;
        let row = &run_experiment(&s).unwrap()[0];
        assert!(row.gmres_converged.unwrap());
        assert!(row.re_sol.unwrap() <= 1e-7);
        assert!(row.residuals.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rankprofile_labels_levels() {
        let rows = run_experiment(&small(Task::RankProfile)).unwrap();
        assert!(rows.iter().any(|r| r.experiment == "rankprofile/leg0/L2"));
        assert!(rows.iter().all(|r| r.rank_min <= r.rank_max));
    }

    #[test]
    fn negcontrol_emits_both_traversals() {
        let rows = run_experiment(&small(Task::NegControl)).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.variant.as_str()).collect();
        assert_eq!(names, ["b2t-full", "t2b-full"]);
        assert!(rows.iter().all(|r| r.re_mvp.is_some()));
    }

    #[test]
    fn config_errors() {
        let mut s = small(Task::Mvp);
        s.dist = Distribution::Chebyshev;
        s.sizes = vec![901];
        assert_eq!(run_experiment(&s).unwrap_err().exit_code(), 1);
        let mut s = small(Task::Mvp);
        s.eps = 0.0;
        assert!(matches!(run_experiment(&s), Err(BenchError::Config(_))));
        assert!("foo".parse::<Task>().is_err());
        assert_eq!("grid".parse::<Distribution>(), Ok(Distribution::Grid));
    }

    #[test]
    fn helmholtz_runs_complex() {
        let mut s = small(Task::Mvp);
        s.kernel = KernelId::Helmholtz;
        s.dim = 3;
        s.sizes = vec![1000];
        let row = &run_experiment(&s).unwrap()[0];
        assert_eq!(row.mem_bytes, 16 * row.mem_scalars);
        assert!(row.re_mvp.unwrap() <= 1e-6);
    }
}
