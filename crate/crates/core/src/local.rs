//! Projection onto an intersection of ellipsoids and a nonmonotone projected
//! gradient method for (possibly nonconvex) quadratic objectives over it.

use std::collections::VecDeque;

use crate::convex::baa::run as baa_run;
use crate::convex::{is_feasible, BaaOptions, DiagonalizedObjective, QuadConstraint, Quadratic, Termination};
use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm};
use crate::problem::Qcqp;
use crate::scalar::Real;

const PROJECTION_KKT: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

/// Euclidean projection onto `{x : gᵢ(x) ≤ 0 ∀i}` by BAA with the objective
/// `‖x − a‖²`.
///
/// Keeps the last projection and its multipliers to warm start the next call.
#[derive(Debug, Clone)]
pub struct Projector<'a, T> {
    constraints: &'a [QuadConstraint<T>],
    anchor: Vec<T>,
    last: Option<(Vec<T>, Vec<T>)>,
}

/// Projection result with the KKT error of the projection problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    pub x: Vec<T>,
    pub multipliers: Vec<T>,
    pub kkt_error: T,
    pub converged: bool,
}

impl<'a, T: Real> Projector<'a, T> {
    /// `feasible` must satisfy every constraint; it seeds the first projection.
    pub fn new(constraints: &'a [QuadConstraint<T>], feasible: &[T]) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::InvalidInput("at least one constraint is required".into()));
        }
        if !is_feasible(constraints, feasible) {
            let v = crate::convex::max_violation(constraints, feasible);
            return Err(Error::InvalidStart { violation: v.as_f64() });
        }
        Ok(Self {
            constraints,
            anchor: feasible.to_vec(),
            last: None,
        })
    }

    pub fn project(&mut self, a: &[T]) -> Result<Projection<T>> {
        let m = self.constraints.len();
        if is_feasible(self.constraints, a) {
            return Ok(Projection {
                x: a.to_vec(),
                multipliers: vec![T::zero(); m],
                kkt_error: T::zero(),
                converged: true,
            });
        }
        let (start, warm) = match &self.last {
            Some((x, lam)) if linalg::dist_sq(x, a) < linalg::dist_sq(&self.anchor, a) => (x.clone(), lam.clone()),
            _ => (self.anchor.clone(), Vec::new()),
        };
        let objective = Quadratic::distance_to(a);
        let diag = DiagonalizedObjective::distance_to(a);
        // The objective gradient is 2(x − a); measure KKT relative to its size.
        let scale = T::one().max(norm(&linalg::sub(&start, a)));
        let opts = BaaOptions {
            tol_kkt: T::lit(PROJECTION_KKT) * scale,
            ..BaaOptions::default()
        };
        let report = baa_run(&objective, &diag, self.constraints, &start, &opts, &warm)?;
        let converged = report.termination == Termination::Converged;
        self.last = Some((report.x.clone(), report.multipliers.clone()));
        Ok(Projection {
            x: report.x,
            multipliers: report.multipliers,
            kkt_error: report.kkt_error,
            converged,
        })
    }
}

/// Convenience wrapper: one projection from a known feasible point.
pub fn project<T: Real>(constraints: &[QuadConstraint<T>], feasible: &[T], a: &[T]) -> Result<Projection<T>> {
    Projector::new(constraints, feasible)?.project(a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgOptions<T> {
    /// Stop when `‖P(x − ∇f(x)) − x‖ ≤ tol`.
    pub tol: T,
    pub max_iter: usize,
    /// Number of past objective values the line search compares against.
    pub memory: usize,
}

impl<T: Real> Default for PgOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-4),
            max_iter: 2000,
            memory: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalTermination {
    Converged,
    MaxIter,
    ProjectionFailure,
    LineSearchFailure,
}

impl LocalTermination {
    pub fn as_str(&self) -> &'static str {
        match self {
            LocalTermination::Converged => "converged",
            LocalTermination::MaxIter => "max_iter",
            LocalTermination::ProjectionFailure => "projection_failure",
            LocalTermination::LineSearchFailure => "line_search_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolveReport<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// `‖P(x − ∇f(x)) − x‖` at the returned point (infinite if never measured).
    pub pg_norm: T,
    pub iterations: usize,
    pub termination: LocalTermination,
}

/// Nonmonotone projected gradient from a feasible `x0`.
///
/// Steps follow `P(x − α∇f(x)) − x` with a Barzilai–Borwein `α`, accepted by
/// an Armijo test against the largest of the last `memory` objective values.
/// The best feasible iterate is returned, so `f(x*) ≤ f(x0)` always holds.
pub fn projected_gradient<T: Real>(problem: &Qcqp<T>, x0: &[T], opts: &PgOptions<T>) -> Result<LocalSolveReport<T>> {
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: x0.len(),
        });
    }
    let f = problem.objective();
    let mut proj = Projector::new(problem.constraints(), x0)?;
    let alpha_bounds = (T::lit(1e-10), T::lit(1e10));

    let mut x = x0.to_vec();
    let mut fx = f.value(&x);
    let mut g = f.gradient(&x);
    let mut history: VecDeque<T> = VecDeque::from([fx]);
    let mut best = (x.clone(), fx, T::infinity());
    let mut alpha = (T::one() / (T::one() + linalg::norm_inf(&g))).max(alpha_bounds.0);

    let report = |best: (Vec<T>, T, T), iterations, termination| LocalSolveReport {
        x: best.0,
        objective: best.1,
        pg_norm: best.2,
        iterations,
        termination,
    };

    for it in 0..opts.max_iter {
        let unit = match proj.project(&linalg::axpy(&x, -T::one(), &g)) {
            Ok(p) => p.x,
            Err(_) => return Ok(report(best, it, LocalTermination::ProjectionFailure)),
        };
        let pg = norm(&linalg::sub(&unit, &x));
        if fx <= best.1 {
            best = (x.clone(), fx, pg);
        }
        if pg <= opts.tol {
            return Ok(report(best, it, LocalTermination::Converged));
        }

        let target = if alpha == T::one() {
            unit
        } else {
            match proj.project(&linalg::axpy(&x, -alpha, &g)) {
                Ok(p) => p.x,
                Err(_) => return Ok(report(best, it, LocalTermination::ProjectionFailure)),
            }
        };
        let d = linalg::sub(&target, &x);
        let slope = dot(&g, &d);
        if slope >= T::zero() {
            return Ok(report(best, it, LocalTermination::LineSearchFailure));
        }
        let reference = history.iter().copied().fold(T::neg_infinity(), T::max);
        let mut s = T::one();
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let cand = linalg::axpy(&x, s, &d);
            let fc = f.value(&cand);
            if fc <= reference + T::lit(ARMIJO) * s * slope {
                accepted = Some((cand, fc));
                break;
            }
            s *= T::lit(0.5);
        }
        let Some((next, f_next)) = accepted else {
            return Ok(report(best, it, LocalTermination::LineSearchFailure));
        };
        let g_next = f.gradient(&next);
        let step = linalg::sub(&next, &x);
        let dg = linalg::sub(&g_next, &g);
        let sy = dot(&step, &dg);
        alpha = if sy > T::zero() { dot(&step, &step) / sy } else { alpha_bounds.1 };
        alpha = alpha.max(alpha_bounds.0).min(alpha_bounds.1);

        x = next;
        fx = f_next;
        g = g_next;
        history.push_back(fx);
        if history.len() > opts.memory.max(1) {
            history.pop_front();
        }
    }
    if fx <= best.1 {
        best = (x, fx, T::infinity());
    }
    Ok(report(best, opts.max_iter, LocalTermination::MaxIter))
}
