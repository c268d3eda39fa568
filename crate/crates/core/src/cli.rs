//! `mtfl` command-line front end.
//!
//! Exit codes: 0 success, 1 failed verification, 2 usage or input error,
//! 3 solver failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dataset::{LambdaGrid, MultiTaskDataset};
use crate::dual::lambda_max;
use crate::error::Error;
use crate::io::{load_dataset, save_dataset, save_weights};
use crate::report::{write_bench_csv, write_path_csv, BenchRow, BenchTotals, Environment};
use crate::screening::{solve_path, PathOptions, PathReport, ReferenceMode, Screen};
use crate::solver::{Method, SolverConfig, StepRule};
use crate::synth::{generate, SynthConfig, SynthKind, RNG_NAME};
use crate::verify::{self, Suite, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mtfl", version, about = "Multi-task feature learning with DPC safe screening")]
pub struct Cli {
    /// Worker threads for screening and verification.
    #[arg(long, global = true, env = "MTFL_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory plus truth.csv.
    Synth(SynthArgs),
    /// Fit the regularization path and write one CSV row per lambda.
    Path(PathArgs),
    /// Time the path with and without screening.
    Bench(BenchArgs),
    /// Run invariant suites and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    S1,
    S2,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "s1")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 10)]
    pub tasks: usize,
    /// Samples per task.
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub d: usize,
    #[arg(long, default_value_t = 0.1)]
    pub support_fraction: f64,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    /// Draw an independent support for each task.
    #[arg(long)]
    pub per_task_support: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScreenArg {
    Dpc,
    None,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReferenceArg {
    Sequential,
    LambdaMax,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Apg,
    Bcd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StepArg {
    Fixed,
    Backtracking,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, default_value_t = 100)]
    pub grid_points: usize,
    /// Smallest lambda as a fraction of lambda_max.
    #[arg(long, default_value_t = 0.01)]
    pub grid_min: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub kkt_tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value = "apg")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "fixed")]
    pub step: StepArg,
    #[arg(long, value_enum, default_value = "sequential")]
    pub reference: ReferenceArg,
    /// Recorded in the output metadata; the path itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SolveArgs {
    fn solver(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.max_iters,
            kkt_tol: self.kkt_tol,
            step: match self.step {
                StepArg::Fixed => StepRule::Fixed,
                StepArg::Backtracking => StepRule::Backtracking,
            },
            method: match self.method {
                MethodArg::Apg => Method::Apg,
                MethodArg::Bcd => Method::Bcd,
            },
            warm_start: None,
        }
    }

    fn path_options(&self, screen: Screen) -> PathOptions {
        PathOptions {
            screen,
            reference: match self.reference {
                ReferenceArg::Sequential => ReferenceMode::Sequential,
                ReferenceArg::LambdaMax => ReferenceMode::LambdaMax,
            },
            ..PathOptions::default()
        }
    }

    fn grid(&self, ds: &MultiTaskDataset) -> Result<LambdaGrid, Error> {
        LambdaGrid::log_spaced(lambda_max(ds)?.value, self.grid_points, self.grid_min)
    }
}

#[derive(Debug, Args)]
pub struct PathArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dpc")]
    pub screen: ScreenArg,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Per-lambda CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON summary; defaults to the CSV path with a .json extension.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Repetitions; timings are medians.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Dataset directory; only the qp1qc suite runs without one.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Suites to run (repeatable); all when omitted.
    #[arg(long, value_parser = parse_suite)]
    pub suite: Vec<Suite>,
    /// Random QP1QC instances.
    #[arg(long, default_value_t = 1000)]
    pub cases: usize,
    /// Sphere points sampled per QP1QC instance.
    #[arg(long, default_value_t = 100_000)]
    pub sphere_samples: usize,
    #[arg(long, default_value_t = 20)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 0.01)]
    pub grid_min: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub kkt_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        // a second build in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Path(a) => cmd_path(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                EXIT_USAGE
            } else {
                EXIT_SOLVER
            }
        }
    }
}

#[derive(Serialize)]
struct SynthMeta<'a> {
    config: &'a SynthConfig,
    rng: &'static str,
    library_version: &'static str,
}

pub fn cmd_synth(a: &SynthArgs) -> Result<i32, Error> {
    let cfg = SynthConfig {
        kind: match a.kind {
            KindArg::S1 => SynthKind::Synthetic1,
            KindArg::S2 => SynthKind::Synthetic2,
        },
        n_tasks: a.tasks,
        n_per_task: a.n,
        d: a.d,
        support_fraction: a.support_fraction,
        noise_scale: a.noise,
        seed: a.seed,
        per_task_support: a.per_task_support,
    };
    let out = generate(&cfg)?;
    save_dataset(&a.out, &out.dataset)?;
    save_weights(a.out.join("truth.csv"), &out.truth)?;
    let meta = SynthMeta {
        config: &cfg,
        rng: RNG_NAME,
        library_version: env!("CARGO_PKG_VERSION"),
    };
    fs::write(a.out.join("synth.json"), serde_json::to_string_pretty(&meta)?)?;
    eprintln!(
        "wrote {} tasks x {} samples x {} features to {}",
        cfg.n_tasks,
        cfg.n_per_task,
        cfg.d,
        a.out.display()
    );
    Ok(EXIT_OK)
}

fn write_to(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<(), Error>) -> Result<(), Error> {
    match out {
        Some(p) => {
            let mut file = std::io::BufWriter::new(fs::File::create(p)?);
            f(&mut file)?;
            file.flush()?;
        }
        None => f(&mut std::io::stdout().lock())?,
    }
    Ok(())
}

fn status_of(e: &Error) -> &'static str {
    match e {
        Error::MaxItersExceeded { .. } => "max_iters_exceeded",
        Error::NoConvergence { .. } => "qp1qc_no_convergence",
        _ => "error",
    }
}

pub fn cmd_path(a: &PathArgs) -> Result<i32, Error> {
    let ds = load_dataset(&a.data)?;
    let grid = a.solve.grid(&ds)?;
    let screen = match a.screen {
        ScreenArg::Dpc => Screen::Dpc,
        ScreenArg::None => Screen::None,
    };
    match solve_path(&ds, &grid, &a.solve.solver(), &a.solve.path_options(screen)) {
        Ok(report) => {
            write_to(a.out.as_deref(), |w| write_path_csv(w, &report, None))?;
            Ok(EXIT_OK)
        }
        Err(failure) => {
            let status = status_of(&failure.error);
            write_to(a.out.as_deref(), |w| {
                write_path_csv(w, &failure.partial, Some((failure.lambda, status)))
            })?;
            eprintln!("error: {failure}");
            Ok(EXIT_SOLVER)
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Serialize)]
struct BenchSummary<'a> {
    dataset: String,
    n_tasks: usize,
    n_features: usize,
    n_samples: Vec<usize>,
    lambda_max: f64,
    grid_points: usize,
    grid_min: f64,
    kkt_tol: f64,
    method: &'static str,
    reps: usize,
    seed: u64,
    totals: &'a BenchTotals,
    environment: Environment,
}

pub fn cmd_bench(a: &BenchArgs) -> Result<i32, Error> {
    if a.reps == 0 {
        return Err(Error::InvalidConfig("--reps must be at least 1".into()));
    }
    let ds = load_dataset(&a.data)?;
    let grid = a.solve.grid(&ds)?;
    let solver = a.solve.solver();
    let mut with_runs: Vec<PathReport> = Vec::with_capacity(a.reps);
    let mut without_runs: Vec<PathReport> = Vec::with_capacity(a.reps);
    for _ in 0..a.reps {
        for (screen, runs) in [(Screen::Dpc, &mut with_runs), (Screen::None, &mut without_runs)] {
            match solve_path(&ds, &grid, &solver, &a.solve.path_options(screen)) {
                Ok(r) => runs.push(r),
                Err(failure) => {
                    eprintln!("error: {failure}");
                    return Ok(EXIT_SOLVER);
                }
            }
        }
    }
    let rows: Vec<BenchRow> = (0..grid.len())
        .map(|k| {
            let with = &with_runs[0].records[k];
            let truth = &without_runs[0].records[k];
            BenchRow {
                lambda_rel: with.lambda_rel,
                n_screened: with.n_screened,
                n_inactive_true: truth.n_truly_inactive,
                rejection_ratio: (truth.n_truly_inactive > 0)
                    .then(|| with.n_screened as f64 / truth.n_truly_inactive as f64),
                t_screen_s: median(with_runs.iter().map(|r| r.records[k].t_screen_s).collect()),
                t_solve_s: median(with_runs.iter().map(|r| r.records[k].t_solve_s).collect()),
                t_solve_noscreen_s: median(without_runs.iter().map(|r| r.records[k].t_solve_s).collect()),
            }
        })
        .collect();
    let totals = BenchTotals::new(&rows);
    write_bench_csv(std::io::BufWriter::new(fs::File::create(&a.out)?), &rows)?;
    let summary = BenchSummary {
        dataset: a.data.display().to_string(),
        n_tasks: ds.n_tasks(),
        n_features: ds.n_features(),
        n_samples: ds.block_lens(),
        lambda_max: grid.lambda_max(),
        grid_points: a.solve.grid_points,
        grid_min: a.solve.grid_min,
        kkt_tol: a.solve.kkt_tol,
        method: match solver.method {
            Method::Apg => "apg",
            Method::Bcd => "bcd",
        },
        reps: a.reps,
        seed: a.solve.seed,
        totals: &totals,
        environment: Environment::capture(),
    };
    let summary_path = a.summary.clone().unwrap_or_else(|| a.out.with_extension("json"));
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    eprintln!(
        "with DPC {:.3}s, without {:.3}s, speedup {:.2}x, mean rejection ratio {:.4}",
        totals.t_total_with_dpc,
        totals.t_total_without_dpc,
        totals.speedup,
        totals.mean_rejection_ratio.unwrap_or(f64::NAN)
    );
    Ok(EXIT_OK)
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<i32, Error> {
    let suites: Vec<Suite> = if a.suite.is_empty() {
        Suite::ALL.to_vec()
    } else {
        a.suite.clone()
    };
    let ds = a.data.as_ref().map(load_dataset).transpose()?;
    let opts = VerifyOptions {
        grid_points: a.grid_points,
        grid_min: a.grid_min,
        kkt_tol: a.kkt_tol,
        cases: a.cases,
        sphere_samples: a.sphere_samples,
        seed: a.seed,
        ..VerifyOptions::default()
    };
    let checks = verify::run(ds.as_ref(), &suites, &opts)?;
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = std::io::stdout().lock();
    for c in &checks {
        writeln!(
            out,
            "{:<6} {:<7} {:<width$}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.suite,
            c.name,
            c.detail
        )?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} checks, {failed} failed", checks.len())?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VERIFY_FAILED })
}
