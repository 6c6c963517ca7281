use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use h2weak_bench::{run_experiment, write_csv, BenchError, Distribution, ExperimentSpec, ResultRow, Task, DEFAULT_DENSE_CAP};
use h2weak_core::{KernelId, Variant};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "h2weak", version, about = "Hierarchical kernel matrix experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and write CSV rows.
    Bench(BenchArgs),
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "mvp")]
    task: Task,
    /// Comma-separated variant ids.
    #[arg(long, value_delimiter = ',', default_value = "h2star-bt")]
    variant: Vec<Variant>,
    #[arg(long, default_value = "log2d")]
    kernel: KernelId,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Comma-separated problem sizes.
    #[arg(short = 'N', value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Leaf capacity; 100 in 2D and 125 in 3D when omitted.
    #[arg(long)]
    nmax: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long)]
    eps_far: Option<f64>,
    #[arg(long)]
    eps_ver: Option<f64>,
    #[arg(long, default_value = "uniform")]
    dist: Distribution,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
    /// Largest N compared against the dense product.
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    dense_cap: usize,
    /// Experiment label; defaults to the task name.
    #[arg(long)]
    name: Option<String>,
    /// Kernel value at coincident points.
    #[arg(long)]
    singular_value: Option<f64>,
    #[arg(long, default_value_t = 1e-12)]
    gmres_tol: f64,
    /// Reuse incoming bases as outgoing ones (symmetric kernels only).
    #[arg(long)]
    symmetric: bool,
}

impl BenchArgs {
    fn spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            name: self.name.clone().unwrap_or_else(|| self.task.to_string()),
            task: self.task,
            kernel: self.kernel,
            dim: self.dim,
            sizes: self.n.clone(),
            n_max: self.nmax,
            dist: self.dist,
            eps: self.eps,
            eps_far: self.eps_far,
            eps_ver: self.eps_ver,
            variants: self.variant.clone(),
            seed: self.seed,
            trials: self.trials,
            dense_cap: self.dense_cap,
            singular_value: self.singular_value,
            gmres_tol: self.gmres_tol,
            symmetric: self.symmetric,
        }
    }
}

fn report(row: &ResultRow) {
    let mut line = format!(
        "{} {} N={} kappa={} init={:.3}s mvp(mean)={:.4}s mvp(best)={:.4}s mem={:.3} GB",
        row.experiment,
        row.variant,
        row.n,
        row.kappa,
        row.init_s,
        row.mvp_s,
        row.mvp_best_s,
        row.mem_bytes as f64 / 1e9
    );
    if let Some(e) = row.re_mvp {
        line += &format!(" re_mvp={e:.3e}");
    }
    if let (Some(it), Some(e)) = (row.gmres_iters, row.re_sol) {
        line += &format!(" iters={it} re_sol={e:.3e}");
        if row.gmres_converged == Some(false) {
            line += " (not converged)";
        }
    }
    eprintln!("{line}");
    if let Some(w) = &row.warning {
        eprintln!("warning: {w}");
    }
}

fn bench(args: &BenchArgs) -> anyhow::Result<()> {
    if let Some(t) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| BenchError::Config(e.to_string()))?;
    }
    let rows = run_experiment(&args.spec())?;
    rows.iter().for_each(report);
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(file, &rows)?;
        }
        None => write_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let Command::Bench(args) = cli.command;
    match bench(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<BenchError>().map_or(1, BenchError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
