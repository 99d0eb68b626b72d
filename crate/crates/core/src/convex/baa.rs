use crate::error::{Error, Result};
use crate::linalg::{self, dot};
use crate::scalar::Real;

use super::subproblem::{solve_shifted, DiagonalizedObjective, ShiftedBall};
use super::{kkt_error_parts, BallMapParams, ConvexQcqp, QuadConstraint, Quadratic};

/// Smallest KKT tolerance accepted; the method stalls near √ε in double precision.
const MIN_TOL_KKT: f64 = 1e-7;
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaaOptions<T> {
    pub params: BallMapParams<T>,
    pub tol_kkt: T,
    pub max_iter: usize,
    /// Stop as soon as the objective drops to or below this value.
    pub target: Option<T>,
}

impl<T: Real> Default for BaaOptions<T> {
    fn default() -> Self {
        Self {
            params: BallMapParams::default(),
            tol_kkt: T::lit(1e-4),
            max_iter: 10_000,
            target: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Converged,
    TargetReached,
    StepCollapse,
    MaxIter,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::TargetReached => "target_reached",
            Termination::StepCollapse => "step_collapse",
            Termination::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry<T> {
    pub objective: T,
    pub kkt: T,
    pub step: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSolveReport<T> {
    pub x: Vec<T>,
    pub multipliers: Vec<T>,
    pub objective: T,
    pub kkt_error: T,
    pub iterations: usize,
    pub trace: Vec<TraceEntry<T>>,
    pub termination: Termination,
}

/// Largest `τ ∈ [0, 1]` keeping the whole segment from `x` to `x + τ(y − x)`
/// inside every constraint.
///
/// Each `gᵢ` restricted to the segment is a convex quadratic in `τ`, so the
/// answer is the smallest positive root over the constraints whose value at
/// `τ = 1` is positive.
pub fn feasible_step<T: Real>(x: &[T], y: &[T], constraints: &[QuadConstraint<T>]) -> T {
    step_to_level(x, &linalg::sub(y, x), constraints, |_| T::zero())
}

/// Largest `τ ∈ [0, 1]` keeping `gᵢ ≤ level(gᵢ)` on the segment from `x` to `x + d`.
fn step_to_level<T: Real>(
    x: &[T],
    d: &[T],
    constraints: &[QuadConstraint<T>],
    level: impl Fn(&QuadConstraint<T>) -> T,
) -> T {
    let mut tau = T::one();
    for g in constraints {
        let cap = level(g);
        let quad = g.a.quad_form(d);
        let lin = dot(&g.gradient(x), d);
        let at_x = (g.value(x) - cap).min(T::zero());
        if quad <= T::zero() || at_x + lin + quad <= T::zero() {
            continue;
        }
        let disc = (lin * lin - T::lit(4.0) * quad * at_x).max(T::zero()).sqrt();
        let root = if lin >= T::zero() {
            if lin + disc == T::zero() {
                T::zero()
            } else {
                T::lit(-2.0) * at_x / (lin + disc)
            }
        } else {
            (disc - lin) / (T::lit(2.0) * quad)
        };
        tau = tau.min(root.max(T::zero()));
    }
    // Rounding can leave the endpoint a hair outside a constraint.
    for _ in 0..60 {
        let p = linalg::axpy(x, tau, d);
        let inside = constraints
            .iter()
            .all(|g| g.value(&p) <= level(g) + g.feas_tol().min(T::tol(1e-10, 64.0)));
        if inside || tau == T::zero() {
            break;
        }
        tau *= T::one() - T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
        if tau < T::lit(MIN_STEP) {
            tau = T::zero();
        }
    }
    tau.max(T::zero()).min(T::one())
}

/// Minimizes a convex QCQP from a feasible start with the ball approximation
/// algorithm.
pub fn baa_solve<T: Real>(problem: &ConvexQcqp<T>, x0: &[T], opts: &BaaOptions<T>) -> Result<ConvexSolveReport<T>> {
    baa_solve_warm(problem, x0, opts, &[])
}

/// As [`baa_solve`], seeding the dual multipliers with `warm`.
pub fn baa_solve_warm<T: Real>(
    problem: &ConvexQcqp<T>,
    x0: &[T],
    opts: &BaaOptions<T>,
    warm: &[T],
) -> Result<ConvexSolveReport<T>> {
    let diag = DiagonalizedObjective::new(problem.objective(), problem.spectrum());
    run(problem.objective(), &diag, problem.constraints(), x0, opts, warm)
}

/// BAA on `objective` (whose Hessian eigenbasis is `diag`) over `constraints`.
pub(crate) fn run<T: Real>(
    objective: &Quadratic<T>,
    diag: &DiagonalizedObjective<T>,
    constraints: &[QuadConstraint<T>],
    x0: &[T],
    opts: &BaaOptions<T>,
    warm: &[T],
) -> Result<ConvexSolveReport<T>> {
    let n = objective.dim();
    if constraints.is_empty() {
        return Err(Error::InvalidInput("at least one constraint is required".into()));
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    if !(opts.tol_kkt >= T::lit(MIN_TOL_KKT)) {
        return Err(Error::InvalidInput(format!(
            "KKT tolerance {} is below the attainable floor {MIN_TOL_KKT:e}",
            opts.tol_kkt
        )));
    }
    if let Some((_, v)) = constraints
        .iter()
        .map(|g| (g, g.value(x0)))
        .find(|(g, v)| *v > g.feas_tol() || !v.is_finite())
    {
        return Err(Error::InvalidStart { violation: v.as_f64() });
    }

    let normalized: Vec<QuadConstraint<T>> = constraints.iter().map(QuadConstraint::normalized).collect();
    // Raw multiplier of constraint i is `to_raw[i]` times the ball multiplier.
    let to_raw: Vec<T> = constraints
        .iter()
        .map(|g| opts.params.alpha() / g.scale())
        .collect();
    let mut ball_lam: Vec<T> = (0..constraints.len())
        .map(|i| warm.get(i).map_or(T::zero(), |&l| l.max(T::zero()) / to_raw[i]))
        .collect();

    let mut x = x0.to_vec();
    let mut fx = objective.value(&x);
    let mut trace = Vec::new();
    let mut multipliers = vec![T::zero(); constraints.len()];
    let mut kkt = T::infinity();
    let finish = |x: Vec<T>, multipliers: Vec<T>, fx: T, kkt: T, trace: Vec<TraceEntry<T>>, termination| {
        Ok(ConvexSolveReport {
            iterations: trace.len(),
            x,
            multipliers,
            objective: fx,
            kkt_error: kkt,
            trace,
            termination,
        })
    };

    for _ in 0..opts.max_iter {
        if opts.target.is_some_and(|t| fx <= t) {
            return finish(x, multipliers, fx, kkt, trace, Termination::TargetReached);
        }
        // Balls of the ball maps at x, written relative to x:
        // center −α∇ĝ, radius α‖∇ĝ‖ − βĝ.
        let (alpha, beta) = (opts.params.alpha(), opts.params.beta());
        let mut balls = Vec::with_capacity(normalized.len());
        for (i, g) in normalized.iter().enumerate() {
            let val = g.value(&x);
            let grad = g.gradient(&x);
            let gn = linalg::norm(&grad);
            if (gn == T::zero() && val >= T::zero()) || alpha * gn - beta * val < T::zero() {
                return Err(Error::ConstraintDegeneracy { index: i });
            }
            balls.push(ShiftedBall {
                e: diag.rotate(&linalg::scale(&grad, alpha)),
                rho: beta * val * (beta * val - T::lit(2.0) * alpha * gn),
            });
        }
        let lin = diag.rotate(&objective.gradient(&x));
        let sol = match solve_shifted(diag, lin, balls, &ball_lam) {
            Ok(s) => s,
            Err(_) => return finish(x, multipliers, fx, kkt, trace, Termination::StepCollapse),
        };
        ball_lam = sol.multipliers;
        multipliers = ball_lam.iter().zip(&to_raw).map(|(&l, &k)| l * k).collect();
        kkt = kkt_error_parts(objective, constraints, &x, &multipliers);
        if kkt <= opts.tol_kkt {
            return finish(x, multipliers, fx, kkt, trace, Termination::Converged);
        }

        let d = sol.x;
        let mut tau = step_to_level(&x, &d, constraints, |_| T::zero());
        if tau < T::lit(MIN_STEP) {
            // At a boundary point rounding can make the step look tangent even
            // though the model ball lies inside the ellipsoid; allow half the
            // feasibility slack instead of giving up.
            tau = step_to_level(&x, &d, constraints, |g| g.feas_tol() * T::lit(0.5));
        }
        let mut next = linalg::axpy(&x, tau, &d);
        let mut f_next = objective.value(&next);
        while f_next > fx && tau >= T::lit(MIN_STEP) {
            tau *= T::lit(0.5);
            next = linalg::axpy(&x, tau, &d);
            f_next = objective.value(&next);
        }
        if tau < T::lit(MIN_STEP) || next == x {
            trace.push(TraceEntry {
                objective: fx,
                kkt,
                step: T::zero(),
            });
            return finish(x, multipliers, fx, kkt, trace, Termination::StepCollapse);
        }
        trace.push(TraceEntry {
            objective: fx,
            kkt,
            step: tau,
        });
        x = next;
        fx = f_next;
    }
    if let Some(last) = trace.last() {
        kkt = last.kkt;
    }
    finish(x, multipliers, fx, kkt, trace, Termination::MaxIter)
}
