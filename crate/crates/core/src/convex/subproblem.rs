//! Ball-constrained subproblems solved through their Lagrange duals.

use crate::error::{Error, Result};
use crate::linalg::{self, dot, Matrix, SymEig};
use crate::scalar::Real;

use super::dual::{self, DualOracle, DualPoint};
use super::{Ball, Quadratic};

const DUAL_MAX_ITER: usize = 5000;
const DUAL_REL_TOL: f64 = 1024.0;

/// Objective `xᵀA₀x + b₀ᵀx` rewritten with `A₀ = QDQᵀ`, so that `x = Qy` gives
/// a diagonal quadratic term.
#[derive(Debug, Clone)]
pub struct DiagonalizedObjective<T> {
    q: Matrix<T>,
    d: Vec<T>,
    b_rot: Vec<T>,
}

impl<T: Real> DiagonalizedObjective<T> {
    pub fn new(objective: &Quadratic<T>, spectrum: &SymEig<T>) -> Self {
        Self {
            q: spectrum.vectors.clone(),
            d: spectrum.values.clone(),
            b_rot: spectrum.vectors.tr_mul_vec(&objective.b),
        }
    }

    /// `‖x − target‖²` up to a constant.
    pub fn distance_to(target: &[T]) -> Self {
        Self {
            q: Matrix::identity(target.len()),
            d: vec![T::one(); target.len()],
            b_rot: linalg::scale(target, T::lit(-2.0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub(crate) fn rotate(&self, v: &[T]) -> Vec<T> {
        self.q.tr_mul_vec(v)
    }

    pub(crate) fn unrotate(&self, v: &[T]) -> Vec<T> {
        self.q.mul_vec(v)
    }
}

/// Minimizer of a ball-constrained subproblem and its ball multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSolution<T> {
    pub x: Vec<T>,
    pub multipliers: Vec<T>,
    /// Projected dual gradient at the returned multipliers.
    pub dual_residual: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Ball `{u : ‖u‖² + 2eᵀu ≤ ρ}` written relative to a chosen origin, which
/// avoids the cancellation in `‖u − c‖² − r²` when `u` is small and the ball
/// is large.
#[derive(Debug, Clone)]
pub(crate) struct ShiftedBall<T> {
    pub e: Vec<T>,
    pub rho: T,
}

fn check_balls<T: Real>(n: usize, balls: &[Ball<T>]) -> Result<()> {
    if balls.is_empty() {
        return Err(Error::InvalidInput("at least one ball is required".into()));
    }
    for b in balls {
        if b.center.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.center.len(),
            });
        }
        if !(b.radius >= T::zero()) || !b.radius.is_finite() {
            return Err(Error::InvalidInput(format!("invalid ball radius {}", b.radius)));
        }
    }
    Ok(())
}

/// Dual of `min Σ dⱼzⱼ² + lᵀz` over shifted balls, in the eigenbasis.
struct DiagonalDual<'a, T> {
    d: &'a [T],
    lin: Vec<T>,
    balls: Vec<ShiftedBall<T>>,
    floor: T,
}

impl<T: Real> DualOracle<T> for DiagonalDual<'_, T> {
    fn len(&self) -> usize {
        self.balls.len()
    }

    fn eval(&self, lam: &[T]) -> Option<DualPoint<T>> {
        let total: T = lam.iter().copied().sum();
        let n = self.d.len();
        let mut z = vec![T::zero(); n];
        for j in 0..n {
            let den = self.d[j] + total;
            if den <= self.floor {
                return None;
            }
            let pull: T = lam.iter().zip(&self.balls).map(|(&l, b)| l * b.e[j]).sum();
            z[j] = -(self.lin[j] + T::lit(2.0) * pull) / (T::lit(2.0) * den);
        }
        let zz = dot(&z, &z);
        let grad: Vec<T> = self
            .balls
            .iter()
            .map(|b| zz + T::lit(2.0) * dot(&b.e, &z) - b.rho)
            .collect();
        let value = z
            .iter()
            .zip(self.d.iter().zip(&self.lin))
            .map(|(&zj, (&dj, &lj))| dj * zj * zj + lj * zj)
            .sum::<T>()
            + dot(lam, &grad);
        Some(DualPoint { value, grad, primal: z })
    }

    fn hessian(&self, lam: &[T], at: &DualPoint<T>) -> Matrix<T> {
        let total: T = lam.iter().copied().sum();
        let m = self.len();
        let z = &at.primal;
        let mut h = Matrix::zeros(m, m);
        for j in 0..z.len() {
            let w = T::lit(-2.0) / (self.d[j] + total);
            for i in 0..m {
                let ui = z[j] + self.balls[i].e[j];
                for k in i..m {
                    h[(i, k)] += w * ui * (z[j] + self.balls[k].e[j]);
                }
            }
        }
        for i in 0..m {
            for k in 0..i {
                h[(i, k)] = h[(k, i)];
            }
        }
        h
    }

    fn grad_scale(&self, i: usize, at: &DualPoint<T>) -> T {
        let zn = linalg::norm(&at.primal);
        let b = &self.balls[i];
        T::one() + zn * zn + T::lit(2.0) * linalg::norm(&b.e) * zn + b.rho.abs()
    }
}

/// Solves the subproblem in the objective's eigenbasis with the origin moved to
/// `origin`: `lin_rot` is `Qᵀ∇f(origin)` and the balls are given relative to
/// `origin` in the same basis. Returns the step `u` in original coordinates.
pub(crate) fn solve_shifted<T: Real>(
    objective: &DiagonalizedObjective<T>,
    lin_rot: Vec<T>,
    balls: Vec<ShiftedBall<T>>,
    warm: &[T],
) -> Result<BallSolution<T>> {
    let scale = objective.d.iter().fold(T::zero(), |m, d| m.max(d.abs()));
    let oracle = DiagonalDual {
        d: &objective.d,
        lin: lin_rot,
        balls,
        floor: T::epsilon() * T::lit(16.0) * (T::one() + scale),
    };
    let sol = dual::maximize(&oracle, warm, T::epsilon() * T::lit(DUAL_REL_TOL), DUAL_MAX_ITER)?;
    let x = objective.unrotate(&sol.point.primal);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SubproblemFailure("non-finite primal recovery".into()));
    }
    Ok(BallSolution {
        x,
        multipliers: sol.lam,
        dual_residual: sol.pg_norm,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

fn solve_absolute<T: Real>(objective: &DiagonalizedObjective<T>, balls: &[Ball<T>], warm: &[T]) -> Result<BallSolution<T>> {
    check_balls(objective.dim(), balls)?;
    let shifted = balls
        .iter()
        .map(|b| {
            let c = objective.rotate(&b.center);
            ShiftedBall {
                rho: b.radius * b.radius - dot(&c, &c),
                e: linalg::scale(&c, -T::one()),
            }
        })
        .collect();
    solve_shifted(objective, objective.b_rot.clone(), shifted, warm)
}

/// Minimizes `xᵀA₀x + b₀ᵀx` over an intersection of balls by dual ascent on
/// the multipliers, warm started from `warm` (missing entries start at zero).
pub fn solve_ball_subproblem<T: Real>(
    objective: &DiagonalizedObjective<T>,
    balls: &[Ball<T>],
    warm: &[T],
) -> Result<BallSolution<T>> {
    solve_absolute(objective, balls, warm)
}

/// Nearest point to `target` in an intersection of balls, recovered from the
/// dual as `x = (a + Σλᵢcᵢ)/(1 + Σλᵢ)`.
pub fn project_onto_balls<T: Real>(target: &[T], balls: &[Ball<T>], warm: &[T]) -> Result<BallSolution<T>> {
    solve_absolute(&DiagonalizedObjective::distance_to(target), balls, warm)
}
