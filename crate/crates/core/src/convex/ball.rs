use crate::error::{Error, Result};
use crate::linalg::{self, norm};
use crate::scalar::Real;

use super::QuadConstraint;

/// Center map `c(x) = x − α∇g(x)` and radius map `r(x) = α‖∇g(x)‖ − βg(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallMapParams<T> {
    alpha: T,
    beta: T,
}

impl<T: Real> BallMapParams<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        if !(alpha > T::zero() && beta > T::zero()) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidInput(format!(
                "ball map parameters must be positive (alpha={alpha}, beta={beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }
}

impl<T: Real> Default for BallMapParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::one(),
            beta: T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Real> Ball<T> {
    /// `‖x − center‖² − radius²`
    pub fn excess(&self, x: &[T]) -> T {
        linalg::dist_sq(x, &self.center) - self.radius * self.radius
    }
}

/// Ball approximation of `{g ≤ 0}` at a feasible point `x`.
///
/// `x` lies strictly inside the ball when `g(x) < 0` and on its boundary when
/// `g(x) = 0`.
pub fn ball_maps<T: Real>(g: &QuadConstraint<T>, x: &[T], params: &BallMapParams<T>) -> Result<Ball<T>> {
    let value = g.value(x);
    if value > g.feas_tol() {
        return Err(Error::InvalidStart {
            violation: value.as_f64(),
        });
    }
    let grad = g.gradient(x);
    let grad_norm = norm(&grad);
    if grad_norm == T::zero() && value >= T::zero() {
        return Err(Error::ConstraintDegeneracy { index: 0 });
    }
    let radius = params.alpha * grad_norm - params.beta * value;
    if radius < T::zero() {
        return Err(Error::ConstraintDegeneracy { index: 0 });
    }
    Ok(Ball {
        center: linalg::axpy(x, -params.alpha, &grad),
        radius,
    })
}
