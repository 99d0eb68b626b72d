//! Maximization of a smooth concave dual function over `λ ≥ 0`.
//!
//! Each iteration first tries a Newton step on the free variables along the
//! projection arc, and falls back to a projected gradient step with a
//! Barzilai–Borwein length when Newton does not give sufficient ascent.

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix, SymMatrix};
use crate::scalar::Real;

pub(crate) struct DualPoint<T> {
    pub value: T,
    pub grad: Vec<T>,
    pub primal: Vec<T>,
}

pub(crate) trait DualOracle<T: Real> {
    fn len(&self) -> usize;

    /// `None` where the dual function is `−∞`.
    fn eval(&self, lam: &[T]) -> Option<DualPoint<T>>;

    /// Hessian of the dual at `lam` (negative semidefinite).
    fn hessian(&self, lam: &[T], at: &DualPoint<T>) -> Matrix<T>;

    /// Magnitude of the terms summed into gradient component `i` at `at`; the
    /// stopping tolerance for that component is relative to it.
    fn grad_scale(&self, i: usize, at: &DualPoint<T>) -> T;
}

pub(crate) struct DualSolution<T> {
    pub lam: Vec<T>,
    pub point: DualPoint<T>,
    pub iterations: usize,
    pub pg_norm: T,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

fn projected_gradient_norm<T: Real>(lam: &[T], grad: &[T]) -> T {
    lam.iter()
        .zip(grad)
        .map(|(&l, &g)| ((l + g).max(T::zero()) - l).abs())
        .fold(T::zero(), T::max)
}

fn arc<T: Real>(lam: &[T], dir: &[T], t: T) -> Vec<T> {
    lam.iter().zip(dir).map(|(&l, &d)| (l + t * d).max(T::zero())).collect()
}

fn ascent<T: Real>(grad: &[T], from: &[T], to: &[T]) -> T {
    grad.iter()
        .zip(from.iter().zip(to))
        .map(|(&g, (&a, &b))| g * (b - a))
        .sum()
}

/// Backtracks along the projection arc; returns the accepted point.
fn search<T: Real, O: DualOracle<T>>(
    oracle: &O,
    lam: &[T],
    at: &DualPoint<T>,
    dir: &[T],
    t0: T,
) -> Option<(Vec<T>, DualPoint<T>)> {
    let mut t = t0;
    for _ in 0..MAX_HALVINGS {
        let cand = arc(lam, dir, t);
        let gain = ascent(&at.grad, lam, &cand);
        if gain <= T::zero() {
            t *= T::lit(0.5);
            continue;
        }
        if let Some(pt) = oracle.eval(&cand) {
            if pt.value.is_finite() && pt.value >= at.value + T::lit(ARMIJO) * gain {
                return Some((cand, pt));
            }
        }
        t *= T::lit(0.5);
    }
    None
}

fn newton_direction<T: Real, O: DualOracle<T>>(oracle: &O, lam: &[T], at: &DualPoint<T>) -> Option<Vec<T>> {
    let m = lam.len();
    let free: Vec<usize> = (0..m)
        .filter(|&i| lam[i] > T::zero() || at.grad[i] > T::zero())
        .collect();
    if free.is_empty() {
        return None;
    }
    let h = oracle.hessian(lam, at);
    let k = free.len();
    let mut neg = Matrix::zeros(k, k);
    let mut diag_sum = T::zero();
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            neg[(a, b)] = -h[(i, j)];
        }
        diag_sum += neg[(a, a)].abs();
    }
    let reg = T::epsilon() * T::lit(64.0) * (diag_sum / T::lit(k as f64)) + T::min_positive_value();
    for a in 0..k {
        neg[(a, a)] += reg;
    }
    let chol = Cholesky::new(&SymMatrix::new(neg).ok()?).ok()?;
    let rhs: Vec<T> = free.iter().map(|&i| at.grad[i]).collect();
    let step = chol.solve(&rhs);
    if step.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut dir = vec![T::zero(); m];
    for (a, &i) in free.iter().enumerate() {
        dir[i] = step[a];
    }
    Some(dir)
}

/// Largest projected-gradient component measured against its own tolerance.
fn scaled_residual<T: Real, O: DualOracle<T>>(oracle: &O, lam: &[T], at: &DualPoint<T>, rel_tol: T) -> T {
    lam.iter()
        .zip(&at.grad)
        .enumerate()
        .map(|(i, (&l, &g))| ((l + g).max(T::zero()) - l).abs() / (rel_tol * oracle.grad_scale(i, at)))
        .fold(T::zero(), T::max)
}

/// Zeroes multipliers that sit within the tolerance of the bound while their
/// gradient pushes them out of the orthant, keeping the result if it is no worse.
fn snap_to_bounds<T: Real, O: DualOracle<T>>(
    oracle: &O,
    lam: Vec<T>,
    at: DualPoint<T>,
    pg: T,
) -> (Vec<T>, DualPoint<T>, T) {
    let snapped: Vec<T> = lam
        .iter()
        .zip(&at.grad)
        .map(|(&l, &g)| if g < T::zero() && l + g <= T::zero() { T::zero() } else { l })
        .collect();
    if snapped == lam {
        return (lam, at, pg);
    }
    match oracle.eval(&snapped) {
        Some(pt) if pt.value.is_finite() && pt.value >= at.value - T::epsilon() * T::lit(64.0) * (T::one() + at.value.abs()) => {
            let pg_new = projected_gradient_norm(&snapped, &pt.grad);
            if pg_new <= pg {
                (snapped, pt, pg_new)
            } else {
                (lam, at, pg)
            }
        }
        _ => (lam, at, pg),
    }
}

/// Maximizes the dual from `warm`, stopping when the projected gradient
/// `‖P(λ + ∇φ) − λ‖_∞` drops below `rel_tol · grad_scale`.
pub(crate) fn maximize<T: Real, O: DualOracle<T>>(
    oracle: &O,
    warm: &[T],
    rel_tol: T,
    max_iter: usize,
) -> Result<DualSolution<T>> {
    let m = oracle.len();
    let floor = T::lit(1e-8);
    let mut lam: Vec<T> = (0..m)
        .map(|i| warm.get(i).copied().unwrap_or(T::zero()).max(floor))
        .collect();
    let mut at = None;
    for _ in 0..200 {
        if let Some(pt) = oracle.eval(&lam) {
            if pt.value.is_finite() {
                at = Some(pt);
                break;
            }
        }
        lam.iter_mut().for_each(|l| *l = *l * T::lit(4.0) + floor);
    }
    let mut at = at.ok_or_else(|| Error::SubproblemFailure("dual function is unbounded below everywhere tried".into()))?;

    let mut bb = T::one() / (T::one() + at.grad.iter().fold(T::zero(), |a, g| a.max(g.abs())));
    let mut pg = projected_gradient_norm(&lam, &at.grad);
    let mut ratio = scaled_residual(oracle, &lam, &at, rel_tol);
    for it in 0..max_iter {
        if ratio <= T::one() {
            let (lam, at, pg) = snap_to_bounds(oracle, lam, at, pg);
            return Ok(DualSolution {
                lam,
                point: at,
                iterations: it,
                pg_norm: pg,
                converged: true,
            });
        }
        let mut next = newton_direction(oracle, &lam, &at).and_then(|dir| search(oracle, &lam, &at, &dir, T::one()));
        if next.is_none() {
            let dir = at.grad.clone();
            next = search(oracle, &lam, &at, &dir, bb);
        }
        let Some((new_lam, new_at)) = next else {
            return Ok(DualSolution {
                lam,
                point: at,
                iterations: it,
                pg_norm: pg,
                converged: false,
            });
        };
        let s: Vec<T> = new_lam.iter().zip(&lam).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = new_at.grad.iter().zip(&at.grad).map(|(&a, &b)| a - b).collect();
        let ss: T = s.iter().map(|&v| v * v).sum();
        let sy: T = s.iter().zip(&y).map(|(&a, &b)| a * b).sum();
        bb = if sy < T::zero() { ss / -sy } else { T::lit(1e10) };
        bb = bb.max(T::lit(1e-10)).min(T::lit(1e10));
        lam = new_lam;
        at = new_at;
        pg = projected_gradient_norm(&lam, &at.grad);
        ratio = scaled_residual(oracle, &lam, &at, rel_tol);
    }
    Ok(DualSolution {
        lam,
        point: at,
        iterations: max_iter,
        pg_norm: pg,
        converged: ratio <= T::one(),
    })
}
