//! General QCQP over an intersection of ellipsoids; the objective Hessian may be
//! indefinite.

use crate::convex::{ConvexQcqp, QuadConstraint, Quadratic};
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, SymEig};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Convexity {
    /// Objective Hessian positive definite.
    Convex,
    /// Positive semidefinite with a (numerically) zero eigenvalue.
    Psd,
    Indefinite,
}

impl Convexity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Convexity::Convex => "convex",
            Convexity::Psd => "psd",
            Convexity::Indefinite => "indefinite",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Qcqp<T> {
    objective: Quadratic<T>,
    constraints: Vec<QuadConstraint<T>>,
    spectrum: SymEig<T>,
    class: Convexity,
}

impl<T: Real> Qcqp<T> {
    pub fn new(objective: Quadratic<T>, constraints: Vec<QuadConstraint<T>>) -> Result<Self> {
        let n = objective.dim();
        if constraints.is_empty() {
            return Err(Error::InvalidInput("at least one constraint is required".into()));
        }
        if let Some(bad) = constraints.iter().find(|c| c.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.dim(),
            });
        }
        if !objective.a.is_finite() || objective.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("objective data must be finite".into()));
        }
        let spectrum = sym_eig(&objective.a)?;
        let zero = T::tol(1e-10, 64.0) * objective.a.frobenius();
        let lo = spectrum.min();
        let class = if lo > zero {
            Convexity::Convex
        } else if lo >= -zero {
            Convexity::Psd
        } else {
            Convexity::Indefinite
        };
        Ok(Self {
            objective,
            constraints,
            spectrum,
            class,
        })
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn objective(&self) -> &Quadratic<T> {
        &self.objective
    }

    pub fn constraints(&self) -> &[QuadConstraint<T>] {
        &self.constraints
    }

    /// Eigendecomposition of the objective Hessian.
    pub fn spectrum(&self) -> &SymEig<T> {
        &self.spectrum
    }

    pub fn class(&self) -> Convexity {
        self.class
    }

    /// Number of negative eigenvalues of the objective Hessian.
    pub fn neigs(&self) -> usize {
        let zero = T::tol(1e-10, 64.0) * self.objective.a.frobenius();
        self.spectrum.values.iter().filter(|&&v| v < -zero).count()
    }

    pub fn value(&self, x: &[T]) -> T {
        self.objective.value(x)
    }

    /// Constraint `i` as an ellipsoid.
    pub fn ellipsoid(&self, i: usize) -> Result<Ellipsoid<T>> {
        let g = &self.constraints[i];
        Ellipsoid::from_constraint(g.a.clone(), &g.b, g.c)
    }

    /// The convex problem, when the objective is positive semidefinite.
    pub fn as_convex(&self) -> Result<ConvexQcqp<T>> {
        if self.class == Convexity::Indefinite {
            return Err(Error::InvalidInput("objective is indefinite".into()));
        }
        ConvexQcqp::with_spectrum(self.objective.clone(), self.spectrum.clone(), self.constraints.clone())
    }
}
