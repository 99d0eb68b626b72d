//! Phase one: a strictly interior point of an intersection of ellipsoids, or a
//! certificate that the intersection is empty.
//!
//! `x₁` is the center of the first ellipsoid. Given a strict point of the first
//! `k − 1` constraints, `g_k` is minimized over them by BAA, stopping as soon
//! as `g_k` drops below zero by the interior margin.

use crate::convex::baa::run as baa_run;
use crate::convex::{is_feasible, max_violation, BaaOptions, DiagonalizedObjective, QuadConstraint, Quadratic, Termination};
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::linalg::{self, dot, solve_spd, sym_eig, Cholesky, SymMatrix};
use crate::scalar::Real;

const INNER_KKT: f64 = 1e-6;

/// Outcome of a phase-one solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility<T> {
    /// Every constraint holds with `gᵢ(x) ≤ −margin(cᵢ)`.
    Feasible(Vec<T>),
    /// The first `level` constraints (1-based) have an empty intersection;
    /// `bound` is a lower bound on `min g_level` over the others.
    Infeasible { level: usize, bound: T },
}

impl<T> Feasibility<T> {
    pub fn point(&self) -> Option<&[T]> {
        match self {
            Feasibility::Feasible(x) => Some(x),
            Feasibility::Infeasible { .. } => None,
        }
    }
}

/// Interior margin `1e-8·(1 + |c|)` for a constraint with constant term `c`.
pub fn margin<T: Real>(c: T) -> T {
    T::tol(1e-8, 64.0) * (T::one() + c.abs())
}

pub fn is_strictly_feasible<T: Real>(constraints: &[QuadConstraint<T>], x: &[T]) -> bool {
    constraints.iter().all(|g| g.value(x) <= -margin(g.c))
}

/// Phase one over all `constraints`.
pub fn find_feasible<T: Real>(constraints: &[QuadConstraint<T>]) -> Result<Feasibility<T>> {
    let Some(first) = constraints.first() else {
        return Err(Error::InvalidInput("at least one constraint is required".into()));
    };
    let center = solve_spd(&first.a, &linalg::scale(&first.b, T::lit(-0.5)))?;
    let g1 = first.value(&center);
    if g1 > margin(first.c) {
        return Ok(Feasibility::Infeasible { level: 1, bound: g1 });
    }
    if g1 > -margin(first.c) {
        return Err(Error::AmbiguousFeasibility { level: 1 });
    }
    let mut x = center;
    for k in 1..constraints.len() {
        match descend(&constraints[k], &constraints[..k], &x, k + 1)? {
            Feasibility::Feasible(next) => x = next,
            infeasible => return Ok(infeasible),
        }
    }
    Ok(Feasibility::Feasible(x))
}

/// A point of `E ∩ Ω` interior to `E`, starting from `x0 ∈ Ω`, or a
/// certificate that `min over Ω` of `E`'s form exceeds its level. The level
/// reported on infeasibility is `constraints.len() + 1`.
pub fn find_feasible_in<T: Real>(e: &Ellipsoid<T>, constraints: &[QuadConstraint<T>], x0: &[T]) -> Result<Feasibility<T>> {
    let (a, b, c) = e.to_constraint();
    let g = QuadConstraint::new(a, b, c)?;
    find_feasible_in_constraint(&g, constraints, x0)
}

pub(crate) fn find_feasible_in_constraint<T: Real>(
    g: &QuadConstraint<T>,
    constraints: &[QuadConstraint<T>],
    x0: &[T],
) -> Result<Feasibility<T>> {
    if constraints.is_empty() {
        return Err(Error::InvalidInput("at least one constraint is required".into()));
    }
    if !is_feasible(constraints, x0) {
        let v = max_violation(constraints, x0);
        return Err(Error::InvalidStart { violation: v.as_f64() });
    }
    descend(g, constraints, x0, constraints.len() + 1)
}

/// Minimizes `g` over `prior` from `x` (feasible for `prior`), stopping early
/// below `−margin`. On success the returned point is strict for `g` and, when
/// `x` was strict for `prior`, for `prior` as well.
fn descend<T: Real>(g: &QuadConstraint<T>, prior: &[QuadConstraint<T>], x: &[T], level: usize) -> Result<Feasibility<T>> {
    let m_g = margin(g.c);
    if g.value(x) <= -m_g {
        return Ok(Feasibility::Feasible(x.to_vec()));
    }
    let objective = Quadratic::new(g.a.clone(), g.b.clone())?;
    let diag = DiagonalizedObjective::new(&objective, &sym_eig(&g.a)?);
    let grad_scale = linalg::norm_inf(&g.gradient(x));
    let opts = BaaOptions {
        tol_kkt: T::lit(INNER_KKT) * (T::one() + grad_scale),
        // Overshoot so a convex combination with `x` keeps a full margin.
        target: Some(-g.c - T::lit(2.0) * m_g),
        ..BaaOptions::default()
    };
    let report = baa_run(&objective, &diag, prior, x, &opts, &[])?;
    let min_g = report.objective + g.c;

    if report.termination == Termination::TargetReached {
        return Ok(Feasibility::Feasible(restore_strict(g, prior, &report.x, x)));
    }
    let bound = dual_bound(g, prior, &report.multipliers).unwrap_or(T::neg_infinity());
    if bound > m_g {
        return Ok(Feasibility::Infeasible { level, bound });
    }
    if report.termination == Termination::Converged && min_g > m_g {
        return Ok(Feasibility::Infeasible { level, bound: bound.max(min_g - report.kkt_error) });
    }
    Err(Error::AmbiguousFeasibility { level })
}

/// A point on the segment from `y` (deep inside `g`) to `x` (strict for
/// `prior`) that is strict for every constraint, if the segment has one;
/// otherwise `y`.
fn restore_strict<T: Real>(g: &QuadConstraint<T>, prior: &[QuadConstraint<T>], y: &[T], x: &[T]) -> Vec<T> {
    if is_strictly_feasible(prior, y) {
        return y.to_vec();
    }
    let d = linalg::sub(x, y);
    let mut lo = T::zero();
    let mut hi = T::one();
    for h in prior.iter().chain(std::iter::once(g)) {
        match sublevel_interval(h, y, &d, -margin(h.c)) {
            Some((a, b)) => {
                lo = lo.max(a);
                hi = hi.min(b);
            }
            None => return y.to_vec(),
        }
    }
    if lo > hi {
        return y.to_vec();
    }
    let t = (lo + hi) * T::lit(0.5);
    let z = linalg::axpy(y, t, &d);
    if is_strictly_feasible(prior, &z) && g.value(&z) <= -margin(g.c) {
        z
    } else {
        y.to_vec()
    }
}

/// `{t ∈ [0, 1] : h(y + t d) ≤ level}`, an interval since `h` is convex.
fn sublevel_interval<T: Real>(h: &QuadConstraint<T>, y: &[T], d: &[T], level: T) -> Option<(T, T)> {
    let qa = h.a.quad_form(d);
    let qb = dot(&h.gradient(y), d);
    let qc = h.value(y) - level;
    let two = T::lit(2.0);
    if qa <= T::zero() {
        // Linear in t.
        return match (qb == T::zero(), qc <= T::zero()) {
            (true, true) => Some((T::zero(), T::one())),
            (true, false) => None,
            _ if qb > T::zero() => Some((T::zero(), (-qc / qb).min(T::one()))).filter(|(a, b)| a <= b),
            _ => Some(((-qc / qb).max(T::zero()), T::one())).filter(|(a, b)| a <= b),
        };
    }
    let disc = qb * qb - T::lit(4.0) * qa * qc;
    if disc < T::zero() {
        return None;
    }
    let s = disc.sqrt();
    let (r1, r2) = if qb >= T::zero() {
        let q = -(qb + s) / two;
        (q / qa, if q != T::zero() { qc / q } else { T::zero() })
    } else {
        let q = -(qb - s) / two;
        (qc / q, q / qa)
    };
    let (a, b) = (r1.min(r2).max(T::zero()), r1.max(r2).min(T::one()));
    (a <= b).then_some((a, b))
}

/// `min_x g(x) + Σλⱼhⱼ(x)`, a lower bound on `min g` over `{hⱼ ≤ 0}` for any
/// `λ ≥ 0`.
fn dual_bound<T: Real>(g: &QuadConstraint<T>, prior: &[QuadConstraint<T>], lam: &[T]) -> Option<T> {
    let mut a: SymMatrix<T> = g.a.clone();
    let mut b = g.b.clone();
    let mut c = g.c;
    for (h, &l) in prior.iter().zip(lam) {
        if l > T::zero() {
            a = a.add_scaled(&h.a, l);
            b = linalg::axpy(&b, l, &h.b);
            c += l * h.c;
        }
    }
    let chol = Cholesky::new(&a).ok()?;
    let x = chol.solve(&linalg::scale(&b, T::lit(-0.5)));
    let v = a.quad_form(&x) + dot(&b, &x) + c;
    v.is_finite().then_some(v)
}
