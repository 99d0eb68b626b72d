//! Solver entry points shared by the subcommands and the benchmark harness,
//! with their serializable reports.

use std::time::Instant;

use ebl_core::bnb::{ebl_solve, EblOptions, GlobalTermination, NodeRecord};
use ebl_core::convex::{baa_solve, BaaOptions, Termination};
use ebl_core::linalg::{self, norm};
use ebl_core::local::Projector;
use ebl_core::phase1::{find_feasible, Feasibility};
use ebl_core::{Error, Qcqp64};
use serde::Serialize;

use crate::error::CliError;
use crate::oracle::{grid_oracle, OracleResult};

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub kkt: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexReport {
    pub x: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub objective: f64,
    pub kkt_error: f64,
    /// `‖P(x − ∇f(x)) − x‖`, with `P` the projection onto the feasible set.
    pub pg_norm: Option<f64>,
    pub iterations: usize,
    pub termination: String,
    pub converged: bool,
    pub seconds: f64,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeRow {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub lower_bound: f64,
    pub value_at_y: Option<f64>,
    pub gap_bound: f64,
    pub ambiguous: bool,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
}

impl From<&NodeRecord<f64>> for NodeRow {
    fn from(n: &NodeRecord<f64>) -> Self {
        Self {
            id: n.id,
            parent: n.parent,
            depth: n.depth,
            lower_bound: n.lower_bound,
            value_at_y: n.value_at_y,
            gap_bound: n.gap_bound,
            ambiguous: n.ambiguous,
            status: n.status.as_str().to_string(),
            center: n.center.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GlobalReport {
    pub x: Option<Vec<f64>>,
    pub val: f64,
    pub lb: f64,
    pub lb1: f64,
    pub ub1: f64,
    pub it: usize,
    pub sigma: f64,
    pub neigs: usize,
    pub nodes_explored: usize,
    pub nodes_pruned: usize,
    pub seconds: f64,
    pub termination: String,
    pub ub_trace: Vec<f64>,
    pub lb_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<NodeRow>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub oracle: OracleResult,
    pub solver_value: f64,
    pub solver_lower_bound: f64,
    /// `solver_value − oracle.value`.
    pub gap: f64,
    /// Largest gap allowed by the stopping rule at the solver's lower bound.
    pub tolerance: f64,
    pub within_tolerance: bool,
    pub termination: String,
}

/// `‖P(x − ∇f(x)) − x‖` for the projection `P` onto the feasible set.
pub fn projected_gradient_norm(problem: &Qcqp64, x: &[f64]) -> Result<f64, Error> {
    let g = problem.objective().gradient(x);
    let mut proj = Projector::new(problem.constraints(), x)?;
    let p = proj.project(&linalg::sub(x, &g))?;
    Ok(norm(&linalg::sub(&p.x, x)))
}

/// A strictly feasible point, or the matching CLI error.
pub fn feasible_point(problem: &Qcqp64) -> Result<Vec<f64>, CliError> {
    match find_feasible(problem.constraints()) {
        Ok(Feasibility::Feasible(x)) => Ok(x),
        Ok(Feasibility::Infeasible { level, .. }) => Err(CliError::Infeasible(format!(
            "the first {level} constraints have no common point"
        ))),
        Err(e) => Err(CliError::Solver(e.to_string())),
    }
}

/// Phase one, then BAA from the phase-one point.
pub fn solve_convex(problem: &Qcqp64, opts: &BaaOptions<f64>) -> Result<ConvexReport, CliError> {
    let convex = problem
        .as_convex()
        .map_err(|e| CliError::Input(format!("{e}; use solve-global for nonconvex objectives")))?;
    let started = Instant::now();
    let x0 = feasible_point(problem)?;
    let r = baa_solve(&convex, &x0, opts)?;
    let seconds = started.elapsed().as_secs_f64();
    let pg_norm = projected_gradient_norm(problem, &r.x).ok();
    Ok(ConvexReport {
        multipliers: r.multipliers,
        objective: r.objective,
        kkt_error: r.kkt_error,
        pg_norm,
        iterations: r.iterations,
        termination: r.termination.as_str().to_string(),
        converged: r.termination == Termination::Converged,
        seconds,
        trace: r
            .trace
            .iter()
            .enumerate()
            .map(|(i, t)| TraceRow {
                iteration: i,
                objective: t.objective,
                kkt: t.kkt,
                step: t.step,
            })
            .collect(),
        x: r.x,
    })
}

pub fn solve_global(problem: &Qcqp64, opts: &EblOptions<f64>, with_nodes: bool) -> Result<GlobalReport, CliError> {
    let r = ebl_solve(problem, opts)?;
    let nodes_pruned = r.pruned();
    Ok(GlobalReport {
        val: r.upper_bound,
        lb: r.lower_bound,
        lb1: r.root_lower,
        ub1: r.root_upper,
        it: r.bisections,
        sigma: r.sigma,
        neigs: problem.neigs(),
        nodes_explored: r.nodes.len(),
        nodes_pruned,
        seconds: r.seconds,
        termination: r.termination.as_str().to_string(),
        nodes: with_nodes.then(|| r.nodes.iter().map(NodeRow::from).collect()),
        ub_trace: r.ub_trace,
        lb_trace: r.lb_trace,
        x: r.x,
    })
}

pub fn is_infeasible(report: &GlobalReport) -> bool {
    report.termination == GlobalTermination::Infeasible.as_str()
}

/// Grid oracle against the branch and bound solver.
pub fn verify(problem: &Qcqp64, resolution: usize, opts: &EblOptions<f64>) -> Result<VerifyReport, CliError> {
    let oracle = grid_oracle(problem, resolution)?;
    let global = solve_global(problem, opts, false)?;
    let tolerance = opts.eps_abs.max(opts.eps_rel * global.lb.abs());
    let gap = global.val - oracle.value;
    Ok(VerifyReport {
        solver_value: global.val,
        solver_lower_bound: global.lb,
        gap,
        tolerance,
        within_tolerance: gap.abs() <= tolerance,
        termination: global.termination,
        oracle,
    })
}
