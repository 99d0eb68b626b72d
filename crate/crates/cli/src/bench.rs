//! Benchmark suites over seeded random instances, written as CSV.
//!
//! `table2`/`table3` run BAA on convex/psd instances per `(n, m)` cell and end
//! each cell with an `avg` row (mean time and iterations, success count).
//! `table4`/`table5` run branch and bound on indefinite instances with
//! `m = 2` and `m = 6`.

use std::io::Write;
use std::str::FromStr;
use std::thread;

use clap::ValueEnum;
use ebl_core::bnb::EblOptions;
use ebl_core::convex::BaaOptions;
use ebl_core::probgen::generate;
use ebl_core::{Convexity, GenSpec};

use crate::error::CliError;
use crate::solve::{solve_convex, solve_global};

/// Stationarity tolerance defining a success.
pub const SUCCESS_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// BAA on positive definite instances.
    Table2,
    /// BAA on positive semidefinite instances.
    Table3,
    /// Branch and bound on indefinite instances, m = 2.
    Table4,
    /// Branch and bound on indefinite instances, m = 6.
    Table5,
}

impl Suite {
    pub fn is_convex(self) -> bool {
        matches!(self, Suite::Table2 | Suite::Table3)
    }

    fn kind(self) -> Convexity {
        match self {
            Suite::Table2 => Convexity::Convex,
            Suite::Table3 => Convexity::Psd,
            Suite::Table4 | Suite::Table5 => Convexity::Indefinite,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Table2 => "table2",
            Suite::Table3 => "table3",
            Suite::Table4 => "table4",
            Suite::Table5 => "table5",
        }
    }

    pub fn default_trials(self) -> usize {
        if self.is_convex() {
            30
        } else {
            4
        }
    }

    pub fn default_cells(self) -> Vec<(usize, usize)> {
        match self {
            Suite::Table2 | Suite::Table3 => vec![(2, 2), (5, 4), (20, 4), (50, 4), (100, 4), (4, 100)],
            Suite::Table4 => [2, 3, 5, 10].iter().map(|&n| (n, 2)).collect(),
            Suite::Table5 => [2, 3, 5, 10].iter().map(|&n| (n, 6)).collect(),
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        if self.is_convex() {
            &[
                "suite", "n", "m", "trial", "seed", "time", "iter", "kkt", "pg_norm", "objective", "termination", "success",
            ]
        } else {
            &[
                "suite", "n", "m", "trial", "seed", "neigs", "lb1", "ub1", "val", "lb", "it", "time", "termination",
            ]
        }
    }
}

/// Parses `n:m,n:m` for convex suites or `n,n` for the global suites (whose
/// `m` is fixed by the suite).
pub fn parse_cells(suite: Suite, dims: &str) -> Result<Vec<(usize, usize)>, CliError> {
    let fixed_m = match suite {
        Suite::Table4 => Some(2),
        Suite::Table5 => Some(6),
        _ => None,
    };
    let bad = |s: &str| CliError::Usage(format!("bad --dims entry '{s}'"));
    dims.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (n, m) = match (item.split_once(':'), fixed_m) {
                (Some((n, m)), _) => (usize::from_str(n).map_err(|_| bad(item))?, usize::from_str(m).map_err(|_| bad(item))?),
                (None, Some(m)) => (usize::from_str(item).map_err(|_| bad(item))?, m),
                (None, None) => return Err(CliError::Usage(format!("--dims for {} needs n:m pairs", suite.name()))),
            };
            if n == 0 || m == 0 {
                return Err(bad(item));
            }
            Ok((n, m))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub suite: Suite,
    pub cells: Vec<(usize, usize)>,
    pub trials: usize,
    pub seed: u64,
    pub threads: usize,
    pub baa: BaaOptions<f64>,
    pub ebl: EblOptions<f64>,
}

/// Seed of trial `t` in every cell.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add(trial as u64)
}

fn fmt(v: f64) -> String {
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Seconds, iterations and success of a convex trial.
type TrialStat = (f64, f64, bool);

fn run_trial(cfg: &BenchConfig, n: usize, m: usize, trial: usize) -> Result<(Vec<String>, Option<TrialStat>), CliError> {
    let seed = trial_seed(cfg.seed, trial);
    let inst = generate::<f64>(&GenSpec::new(cfg.suite.kind(), n, m, seed))?;
    let head = vec![cfg.suite.name().to_string(), n.to_string(), m.to_string(), trial.to_string(), seed.to_string()];
    if cfg.suite.is_convex() {
        let r = solve_convex(&inst.problem, &cfg.baa)?;
        let success = r.pg_norm.is_some_and(|p| p <= SUCCESS_TOL);
        let mut row = head;
        row.extend([
            fmt(r.seconds),
            r.iterations.to_string(),
            fmt(r.kkt_error),
            r.pg_norm.map_or_else(|| "nan".to_string(), fmt),
            fmt(r.objective),
            r.termination,
            success.to_string(),
        ]);
        Ok((row, Some((r.seconds, r.iterations as f64, success))))
    } else {
        let r = solve_global(&inst.problem, &cfg.ebl, false)?;
        let mut row = head;
        row.extend([
            r.neigs.to_string(),
            fmt(r.lb1),
            fmt(r.ub1),
            fmt(r.val),
            fmt(r.lb),
            r.it.to_string(),
            fmt(r.seconds),
            r.termination,
        ]);
        Ok((row, None))
    }
}

/// Runs the suite and writes CSV (header first) to `out`. Trials of a cell may
/// run on several threads; rows are always written in trial order.
pub fn run_bench(cfg: &BenchConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(cfg.suite.header()).map_err(io)?;
    let threads = cfg.threads.max(1);
    for &(n, m) in &cfg.cells {
        let mut results = Vec::with_capacity(cfg.trials);
        for chunk in (0..cfg.trials).collect::<Vec<_>>().chunks(threads) {
            let part: Vec<_> = thread::scope(|s| {
                let hs: Vec<_> = chunk.iter().map(|&t| s.spawn(move || run_trial(cfg, n, m, t))).collect();
                hs.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
            });
            results.extend(part);
        }
        let mut stats = Vec::new();
        for r in results {
            let (row, stat) = r?;
            w.write_record(&row).map_err(io)?;
            stats.extend(stat);
        }
        if cfg.suite.is_convex() && !stats.is_empty() {
            let k = stats.len() as f64;
            let time = stats.iter().map(|s| s.0).sum::<f64>() / k;
            let iter = stats.iter().map(|s| s.1).sum::<f64>() / k;
            let successes = stats.iter().filter(|s| s.2).count();
            let row = [
                cfg.suite.name().to_string(),
                n.to_string(),
                m.to_string(),
                "avg".to_string(),
                String::new(),
                fmt(time),
                fmt(iter),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                successes.to_string(),
            ];
            w.write_record(&row).map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}
