//! Command-line parsing and subcommand dispatch.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ebl_core::bnb::EblOptions;
use ebl_core::convex::{BaaOptions, BallMapParams};
use ebl_core::probgen::generate;
use ebl_core::{Convexity, GenSpec};
use serde::Serialize;

use crate::bench::{parse_cells, run_bench, BenchConfig, Suite};
use crate::error::{exit, CliError};
use crate::files::ProblemFile;
use crate::oracle::default_resolution;
use crate::solve::{is_infeasible, solve_convex, solve_global, verify};

const ENV_HELP: &str = "\
Environment overrides for default tolerances (command-line flags win):
  EBL_TOL_KKT      BAA KKT tolerance (default 1e-4)
  EBL_MAX_ITER     BAA iteration limit (default 10000)
  EBL_EPS_ABS      branch and bound absolute gap (default 1e-5)
  EBL_EPS_REL      branch and bound relative gap (default 1e-2)
  EBL_NODE_BUDGET  branch and bound bisection budget (default 10000)

Exit codes: 0 success, 2 infeasible, 3 solver failure, 4 usage or bad input.";

#[derive(Debug, Parser)]
#[command(
    name = "ebl",
    version,
    about = "Global optimization of quadratic programs over intersections of ellipsoids",
    after_help = ENV_HELP
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded random instance as a JSON problem file.
    Gen(GenArgs),
    /// Solve a convex problem with the ball approximation algorithm.
    SolveConvex(SolveConvexArgs),
    /// Solve a problem globally by ellipsoidal branch and bound.
    SolveGlobal(SolveGlobalArgs),
    /// Run a benchmark suite over seeded instances and write CSV.
    Bench(BenchArgs),
    /// Compare the global solver against a brute-force grid oracle (n <= 6).
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Convex,
    Psd,
    Indefinite,
}

impl From<Kind> for Convexity {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Convex => Convexity::Convex,
            Kind::Psd => Convexity::Psd,
            Kind::Indefinite => Convexity::Indefinite,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(short, long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(short, long, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: u64,
    #[arg(long)]
    pub seed: u64,
    /// Output path (stdout if omitted).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaaArgs {
    /// Ball center scale α in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Ball radius scale β > 0.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// KKT tolerance.
    #[arg(long, env = "EBL_TOL_KKT", default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, env = "EBL_MAX_ITER", default_value_t = 10_000)]
    pub max_iter: usize,
}

impl BaaArgs {
    fn options(&self) -> Result<BaaOptions<f64>, CliError> {
        let params = BallMapParams::new(self.alpha, self.beta).map_err(|e| CliError::Usage(e.to_string()))?;
        if !(self.tol > 0.0) {
            return Err(CliError::Usage("--tol must be positive".into()));
        }
        Ok(BaaOptions {
            params,
            tol_kkt: self.tol,
            max_iter: self.max_iter,
            target: None,
        })
    }
}

#[derive(Debug, Args)]
pub struct SolveConvexArgs {
    /// Problem file (JSON).
    pub file: PathBuf,
    #[command(flatten)]
    pub baa: BaaArgs,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    /// Write the per-iteration objective/KKT trace as CSV.
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    #[arg(long, env = "EBL_EPS_ABS", default_value_t = 1e-5)]
    pub eps_abs: f64,
    #[arg(long, env = "EBL_EPS_REL", default_value_t = 1e-2)]
    pub eps_rel: f64,
    /// Maximum number of bisections.
    #[arg(long, env = "EBL_NODE_BUDGET", default_value_t = 10_000)]
    pub node_budget: usize,
    /// KKT tolerance of the lower-bound solves.
    #[arg(long, env = "EBL_TOL_KKT", default_value_t = 1e-4)]
    pub tol: f64,
    /// Bound the two children of each bisection sequentially.
    #[arg(long)]
    pub serial: bool,
}

impl GlobalArgs {
    fn options(&self) -> Result<EblOptions<f64>, CliError> {
        if !(self.eps_abs >= 0.0 && self.eps_rel >= 0.0) || self.eps_abs + self.eps_rel == 0.0 {
            return Err(CliError::Usage("gap tolerances must be nonnegative and not both zero".into()));
        }
        Ok(EblOptions {
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
            node_budget: self.node_budget,
            baa: BaaOptions {
                tol_kkt: self.tol,
                ..BaaOptions::default()
            },
            parallel: !self.serial,
            ..EblOptions::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct SolveGlobalArgs {
    /// Problem file (JSON).
    pub file: PathBuf,
    #[command(flatten)]
    pub global: GlobalArgs,
    /// Include every node record in the report.
    #[arg(long)]
    pub nodes: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Instances per cell (30 for table2/3, 4 for table4/5).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Cells: `n:m,...` for table2/3, `n,...` for table4/5.
    #[arg(long)]
    pub dims: Option<String>,
    /// Base seed; trial t of every cell uses seed + t.
    #[arg(long)]
    pub seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
    /// Worker threads per cell.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Problem file (JSON).
    pub file: PathBuf,
    /// Grid points per axis (default: up to 400, keeping the grid under 1e8 points).
    #[arg(long)]
    pub resolution: Option<usize>,
    #[command(flatten)]
    pub global: GlobalArgs,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    let res = match path {
        Some(p) => create(p)?.write_all(text.as_bytes()),
        None => io::stdout().lock().write_all(text.as_bytes()),
    };
    res.map_err(|e| CliError::Io(e.to_string()))
}

fn load(path: &Path) -> Result<ebl_core::Qcqp64, CliError> {
    let loaded = ProblemFile::load(path)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded.problem)
}

fn cmd_gen(a: &GenArgs) -> Result<(), CliError> {
    let spec = GenSpec::new(a.kind.into(), a.n as usize, a.m as usize, a.seed);
    let inst = generate::<f64>(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let file = ProblemFile::from_instance(&inst);
    match &a.out {
        Some(p) => file.save(p),
        None => io::stdout()
            .lock()
            .write_all(file.to_json().as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn cmd_solve_convex(a: &SolveConvexArgs) -> Result<(), CliError> {
    let problem = load(&a.file)?;
    let report = solve_convex(&problem, &a.baa.options()?)?;
    if let Some(p) = &a.trace_csv {
        let mut w = csv::Writer::from_writer(create(p)?);
        for row in &report.trace {
            w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    }
    write_json(&report, a.json_out.as_deref())?;
    if report.converged {
        Ok(())
    } else {
        Err(CliError::Solver(format!(
            "BAA stopped early ({}) with KKT error {:e}",
            report.termination, report.kkt_error
        )))
    }
}

fn cmd_solve_global(a: &SolveGlobalArgs) -> Result<(), CliError> {
    let problem = load(&a.file)?;
    let report = solve_global(&problem, &a.global.options()?, a.nodes)?;
    write_json(&report, a.json_out.as_deref())?;
    if is_infeasible(&report) {
        return Err(CliError::Infeasible("the constraints have no common point".into()));
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    let cells = match &a.dims {
        Some(d) => parse_cells(a.suite, d)?,
        None => a.suite.default_cells(),
    };
    let cfg = BenchConfig {
        suite: a.suite,
        cells,
        trials: a.trials.unwrap_or_else(|| a.suite.default_trials()),
        seed: a.seed,
        threads: a.threads,
        baa: BaaOptions {
            tol_kkt: a.global.tol,
            ..BaaOptions::default()
        },
        ebl: a.global.options()?,
    };
    match &a.csv_out {
        Some(p) => run_bench(&cfg, &mut create(p)?),
        None => run_bench(&cfg, &mut io::stdout().lock()),
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), CliError> {
    let problem = load(&a.file)?;
    let resolution = a.resolution.unwrap_or_else(|| default_resolution(problem.dim()));
    let report = verify(&problem, resolution, &a.global.options()?)?;
    write_json(&report, a.json_out.as_deref())
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::SolveConvex(a) => cmd_solve_convex(a),
        Command::SolveGlobal(a) => cmd_solve_global(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
