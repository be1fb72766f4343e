use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use adalvr::optimizer::Checkpoint;
use adalvr::scaling::Discounts;
use adalvr::{run, OptimizerConfig};

use crate::algorithms::Algorithm;
use crate::config;
use crate::error::{BenchError, Result};
use crate::grid::{self, GridSpec};
use crate::output::{self, format_float};
use crate::suite::{self, SuiteSpec};
use crate::workload::{self, Source, Workload, WorkloadSpec};

#[derive(Debug, Parser)]
#[command(name = "adalvr-bench", version, about = "Sweeps, single runs and bound checks for adaptive variance-reduced methods")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep a grid of algorithms, L̃ values and seeds and write the result CSV.
    Run(RunArgs),
    /// Run the bound checks on recorded projected runs.
    Verify(VerifyArgs),
    /// One run with per-iteration checkpoints.
    Solve(SolveArgs),
    /// Compute a high-accuracy minimizer of the training objective.
    Reference(ReferenceArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// `synthetic` or a CSV file whose last column is the label.
    #[arg(long, default_value = "synthetic")]
    pub dataset: String,
    /// `logistic` or `ls`.
    #[arg(long, default_value = "logistic")]
    pub problem: String,
    /// Samples per component.
    #[arg(long, default_value_t = 10)]
    pub batch: usize,
    /// Keep only the first rows of a file dataset.
    #[arg(long)]
    pub rows: Option<usize>,
    /// The dataset file starts with a header line.
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Synthetic sample count.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Synthetic feature count.
    #[arg(long, default_value_t = 20)]
    pub features: usize,
    /// Synthetic class count.
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    /// Key-value file with default flag values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl DataArgs {
    pub fn spec(&self) -> Result<WorkloadSpec> {
        Ok(WorkloadSpec {
            source: self.dataset.parse::<Source>()?,
            problem: workload::parse_problem(&self.problem)?,
            batch: self.batch,
            rows: self.rows,
            has_header: self.header,
            train_fraction: self.train_fraction,
            data_seed: self.data_seed,
            samples: self.samples,
            features: self.features,
            classes: self.classes,
        })
    }
}

#[derive(Debug, Args)]
pub struct MethodArgs {
    /// L-SVRG refresh probability (default 1/n).
    #[arg(long)]
    pub p: Option<f64>,
    /// Project onto a box centered at the start point.
    #[arg(long)]
    pub project: bool,
    /// Box half-width (default 10 ||x1 - x*|| + 1).
    #[arg(long)]
    pub box_halfwidth: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
}

impl MethodArgs {
    fn discounts(&self) -> Discounts {
        Discounts {
            gamma: self.gamma,
            beta1: self.beta1,
            beta2: self.beta2,
        }
    }

    fn domain(&self, w: &Workload, force: bool) -> Result<Option<adalvr::Domain>> {
        if !(self.project || force) {
            return Ok(None);
        }
        let x1 = vec![0.0; w.train.dim()];
        let x_star = match self.box_halfwidth {
            Some(_) => None,
            None => Some(workload::reference(&w.train)?.x),
        };
        Ok(Some(workload::verification_box(&x1, x_star.as_deref(), self.box_halfwidth)?))
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Comma-separated algorithm ids (default: all).
    #[arg(long, value_delimiter = ',')]
    pub algos: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = grid::DEFAULT_LTILDES)]
    pub ltilde: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub epochs: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0u64])]
    pub seeds: Vec<u64>,
    /// Gradient evaluations between rows (default n).
    #[arg(long)]
    pub stride: Option<u64>,
    /// Output CSV (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Comma-separated algorithm ids (default: the four adaptive VR variants).
    #[arg(long, value_delimiter = ',')]
    pub algos: Vec<String>,
    /// The step size is `1 / L̃`.
    #[arg(long, default_value_t = 1.0)]
    pub ltilde: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    /// Report CSV (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, default_value = "adasaga-diag")]
    pub algo: String,
    #[arg(long, default_value_t = 1.0)]
    pub ltilde: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of iterates T.
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    /// Iterations between checkpoints.
    #[arg(long, default_value_t = 10)]
    pub every: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = workload::REFERENCE_TOLERANCE)]
    pub tol: f64,
    /// Write the minimizer, one coordinate per line.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_algos(ids: &[String], default: fn() -> Vec<Algorithm>) -> Result<Vec<Algorithm>> {
    if ids.is_empty() {
        Ok(default())
    } else {
        ids.iter().map(|s| s.parse()).collect()
    }
}

/// Parses `args` (including the program name), expanding `--config`.
pub fn parse_from(args: Vec<OsString>) -> Result<Cli> {
    let args = config::expand_args(args)?;
    let mut cmd = Cli::command();
    for name in ["run", "verify", "solve", "reference"] {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    let matches = match cmd.try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => e.exit(),
    };
    Cli::from_arg_matches(&matches).map_err(|e| BenchError::Config(e.to_string()))
}

/// Returns whether every check passed (always true except for `verify`).
pub fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(a) => {
            let w = a.data.spec()?.build()?;
            let spec = GridSpec {
                algorithms: parse_algos(&a.algos, Algorithm::all)?,
                ltildes: a.ltilde.clone(),
                epochs: a.epochs,
                seeds: a.seeds.clone(),
                stride: a.stride,
                p: a.method.p,
                domain: a.method.domain(&w, false)?,
                discounts: a.method.discounts(),
                workers: a.workers,
            };
            let rows = grid::run_grid(&spec, &w.train, w.eval_set())?;
            output::write_rows(&rows, sink(&a.out)?)?;
            Ok(true)
        }
        Command::Verify(a) => {
            let w = a.data.spec()?.build()?;
            let reference = workload::reference(&w.train)?;
            let domain = a.method.domain(&w, true)?.expect("forced domain");
            let spec = SuiteSpec {
                algorithms: parse_algos(&a.algos, Algorithm::adalvr)?,
                eta: 1.0 / a.ltilde,
                seeds: a.seeds.clone(),
                iterations: a.iterations,
                p: a.method.p,
            };
            let reports = suite::run_suite(&spec, &w.train, &domain, &reference)?;
            suite::write_reports(&reports, sink(&a.out)?)?;
            let failed = reports.iter().filter(|r| !r.pass).count();
            eprintln!("{} checks, {} failed", reports.len(), failed);
            Ok(failed == 0)
        }
        Command::Solve(a) => {
            let w = a.data.spec()?.build()?;
            let alg: Algorithm = a.algo.parse()?;
            let mut cfg = OptimizerConfig::new(alg.estimator, alg.scaling, 1.0 / a.ltilde, a.iterations)
                .with_seed(a.seed)
                .with_stride(a.every.max(1));
            cfg.p = a.method.p;
            cfg.discounts = a.method.discounts();
            if let Some(d) = a.method.domain(&w, false)? {
                cfg = cfg.projected(d);
            }
            let trace = match run(&cfg, &w.train, &vec![0.0; w.train.dim()]) {
                Ok(t) => t,
                Err(adalvr::Error::Diverged { iteration, trace }) => {
                    eprintln!("diverged at t = {iteration}");
                    *trace
                }
                Err(e) => return Err(e.into()),
            };
            write_checkpoints(&trace.checkpoints, sink(&a.out)?)?;
            if let Some(c) = trace.final_checkpoint() {
                eprintln!(
                    "{alg}: T={} gradients={} f(x_T)={:.10e} f(avg)={:.10e}",
                    c.t, c.gradients, c.objective, c.average_objective
                );
            }
            Ok(true)
        }
        Command::Reference(a) => {
            let w = a.data.spec()?.build()?;
            let r = adalvr::optimizer::reference_solution(&w.train, a.tol)?;
            println!("value,grad_norm,iterations");
            println!("{},{},{}", format_float(r.value), format_float(r.grad_norm), r.iterations);
            if let Some(p) = &a.out {
                let mut f = BufWriter::new(File::create(p)?);
                for v in &r.x {
                    writeln!(f, "{}", format_float(*v))?;
                }
                f.flush()?;
            }
            Ok(true)
        }
    }
}

fn write_checkpoints<W: Write>(cps: &[Checkpoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "gradients", "objective", "average_objective", "grad_norm_sq", "preconditioner_trace"])?;
    for c in cps {
        w.write_record([
            c.t.to_string(),
            c.gradients.to_string(),
            format_float(c.objective),
            format_float(c.average_objective),
            c.grad_norm_sq.map(format_float).unwrap_or_default(),
            format_float(c.preconditioner_trace),
        ])?;
    }
    w.flush()?;
    Ok(())
}
