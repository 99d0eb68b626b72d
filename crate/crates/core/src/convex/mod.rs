//! Convex QCQPs over intersections of ellipsoids, solved by the ball
//! approximation algorithm (BAA).
//!
//! Each iteration replaces every constraint `gᵢ ≤ 0` by a ball through the
//! current iterate, minimizes the objective over the intersection of balls
//! through its Lagrange dual, and then moves toward that minimizer as far as
//! the true constraints allow.

pub(crate) mod baa;
mod ball;
mod dual;
mod subproblem;

pub use baa::{baa_solve, baa_solve_warm, feasible_step, BaaOptions, ConvexSolveReport, Termination, TraceEntry};
pub use ball::{ball_maps, Ball, BallMapParams};
pub use subproblem::{project_onto_balls, solve_ball_subproblem, BallSolution, DiagonalizedObjective};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, sym_eig, Cholesky, SymEig, SymMatrix};
use crate::scalar::Real;

/// `f(x) = xᵀAx + bᵀx + constant`
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic<T> {
    pub a: SymMatrix<T>,
    pub b: Vec<T>,
    pub constant: T,
}

impl<T: Real> Quadratic<T> {
    pub fn new(a: SymMatrix<T>, b: Vec<T>) -> Result<Self> {
        if a.dim() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.len(),
            });
        }
        Ok(Self {
            a,
            b,
            constant: T::zero(),
        })
    }

    /// `‖x − target‖²` without its constant term.
    pub fn distance_to(target: &[T]) -> Self {
        Self {
            a: SymMatrix::identity(target.len()),
            b: target.iter().map(|&v| v * T::lit(-2.0)).collect(),
            constant: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn value(&self, x: &[T]) -> T {
        self.a.quad_form(x) + dot(&self.b, x) + self.constant
    }

    /// `2Ax + b`
    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let ax = self.a.mul_vec(x);
        ax.iter().zip(&self.b).map(|(&v, &b)| T::lit(2.0) * v + b).collect()
    }
}

/// `g(x) = xᵀAx + bᵀx + c ≤ 0` with `A` positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadConstraint<T> {
    pub a: SymMatrix<T>,
    pub b: Vec<T>,
    pub c: T,
    /// Largest eigenvalue of `A`; the natural curvature scale of the constraint.
    scale: T,
}

impl<T: Real> QuadConstraint<T> {
    pub fn new(a: SymMatrix<T>, b: Vec<T>, c: T) -> Result<Self> {
        if a.dim() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.len(),
            });
        }
        if !c.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("constraint data must be finite".into()));
        }
        Cholesky::new(&a)?;
        let scale = sym_eig(&a)?.max();
        Ok(Self { a, b, c, scale })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn value(&self, x: &[T]) -> T {
        self.a.quad_form(x) + dot(&self.b, x) + self.c
    }

    /// `2Ax + b`
    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let ax = self.a.mul_vec(x);
        ax.iter().zip(&self.b).map(|(&v, &b)| T::lit(2.0) * v + b).collect()
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    /// Feasibility slack allowed for this constraint: `1e-9·(1 + |c|)`.
    pub fn feas_tol(&self) -> T {
        T::tol(1e-9, 64.0) * (T::one() + self.c.abs())
    }

    /// Copy divided by `2·scale`, so the Hessian has spectral norm 1. Balls from
    /// [`ball_maps`] with `α ≤ 1` through boundary points of the normalized
    /// constraint lie inside its ellipsoid.
    pub fn normalized(&self) -> Self {
        let inv = T::one() / (T::lit(2.0) * self.scale);
        Self {
            a: self.a.scaled(inv),
            b: linalg::scale(&self.b, inv),
            c: self.c * inv,
            scale: T::one(),
        }
    }

    pub fn cast<U: Real>(&self) -> QuadConstraint<U> {
        QuadConstraint {
            a: self.a.cast(),
            b: self.b.iter().map(|&v| U::lit(v.as_f64())).collect(),
            c: U::lit(self.c.as_f64()),
            scale: U::lit(self.scale.as_f64()),
        }
    }
}

/// Convex QCQP: positive semidefinite objective and ellipsoidal constraints.
#[derive(Debug, Clone)]
pub struct ConvexQcqp<T> {
    objective: Quadratic<T>,
    spectrum: SymEig<T>,
    constraints: Vec<QuadConstraint<T>>,
}

impl<T: Real> ConvexQcqp<T> {
    pub fn new(objective: Quadratic<T>, constraints: Vec<QuadConstraint<T>>) -> Result<Self> {
        let spectrum = sym_eig(&objective.a)?;
        Self::with_spectrum(objective, spectrum, constraints)
    }

    /// Builds the problem from an already computed eigendecomposition of the
    /// objective Hessian.
    pub fn with_spectrum(
        objective: Quadratic<T>,
        spectrum: SymEig<T>,
        constraints: Vec<QuadConstraint<T>>,
    ) -> Result<Self> {
        let n = objective.dim();
        if spectrum.values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: spectrum.values.len(),
            });
        }
        if let Some(bad) = constraints.iter().find(|c| c.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.dim(),
            });
        }
        let floor = -T::tol(1e-10, 64.0) * objective.a.frobenius();
        if spectrum.min() < floor {
            return Err(Error::InvalidInput(format!(
                "objective is not convex (smallest Hessian eigenvalue {})",
                spectrum.min()
            )));
        }
        Ok(Self {
            objective,
            spectrum,
            constraints,
        })
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn objective(&self) -> &Quadratic<T> {
        &self.objective
    }

    pub fn spectrum(&self) -> &SymEig<T> {
        &self.spectrum
    }

    pub fn constraints(&self) -> &[QuadConstraint<T>] {
        &self.constraints
    }

    pub fn grad_objective(&self, x: &[T]) -> Vec<T> {
        self.objective.gradient(x)
    }

    pub fn grad_constraint(&self, i: usize, x: &[T]) -> Vec<T> {
        self.constraints[i].gradient(x)
    }

    /// Largest constraint value relative to its feasibility slack; `≤ 1` means feasible.
    pub fn max_violation(&self, x: &[T]) -> T {
        max_violation(&self.constraints, x)
    }
}

/// Largest `gᵢ(x)` over the constraints (negative when strictly feasible).
pub fn max_violation<T: Real>(constraints: &[QuadConstraint<T>], x: &[T]) -> T {
    constraints
        .iter()
        .map(|c| c.value(x))
        .fold(T::neg_infinity(), T::max)
}

pub fn is_feasible<T: Real>(constraints: &[QuadConstraint<T>], x: &[T]) -> bool {
    constraints.iter().all(|c| c.value(x) <= c.feas_tol())
}

/// `‖∇f(x) + Σλᵢ∇gᵢ(x)‖_∞ + maxᵢ |λᵢ gᵢ(x)|`
pub fn kkt_error<T: Real>(problem: &ConvexQcqp<T>, x: &[T], multipliers: &[T]) -> T {
    kkt_error_parts(&problem.objective, &problem.constraints, x, multipliers)
}

pub(crate) fn kkt_error_parts<T: Real>(
    objective: &Quadratic<T>,
    constraints: &[QuadConstraint<T>],
    x: &[T],
    multipliers: &[T],
) -> T {
    let mut grad = objective.gradient(x);
    let mut slack = T::zero();
    for (c, &lam) in constraints.iter().zip(multipliers) {
        if lam != T::zero() {
            let g = c.gradient(x);
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += lam * gi;
            }
        }
        slack = slack.max((lam * c.value(x)).abs());
    }
    linalg::norm_inf(&grad) + slack
}
