//! Ellipsoids in quadratic form `{x : xᵀAx − 2bᵀx ≤ ρ}` and center form
//! `{x : (x−c)ᵀB⁻¹(x−c) ≤ 1}`, their bisection, and the best affine
//! underestimate of `−‖x‖²` over them.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, extreme_eigenpair, sym_eig, Cholesky, Extreme, SymMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct Ellipsoid<T: Real> {
    quad_a: SymMatrix<T>,
    quad_b: Vec<T>,
    quad_rho: T,
    center: Vec<T>,
    shape: SymMatrix<T>,
    axis: OnceLock<MajorAxis<T>>,
}

/// Longest semi-axis: `extreme_point = center + half_length · direction`.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorAxis<T> {
    pub direction: Vec<T>,
    pub extreme_point: Vec<T>,
    pub half_length: T,
}

/// Point membership with the signed slack `xᵀAx − 2bᵀx − ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership<T> {
    pub inside: bool,
    pub slack: T,
}

/// `ℓ(x) = slopeᵀx + offset`, an affine minorant of `−‖x‖²` on an ellipsoid
/// whose worst-case error over the ellipsoid is `gap`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineUnderestimate<T> {
    pub slope: Vec<T>,
    pub offset: T,
    pub gap: T,
    pub witness_mu: Vec<T>,
}

impl<T: Real> AffineUnderestimate<T> {
    pub fn evaluate(&self, x: &[T]) -> T {
        dot(&self.slope, x) + self.offset
    }
}

const AXIS_TOL: f64 = 1e-13;
const AXIS_MAX_ITER: usize = 20_000;

impl<T: Real> Ellipsoid<T> {
    /// Builds `{x : xᵀAx − 2bᵀx ≤ ρ}`; `A` must be positive definite and the set
    /// must have nonempty interior.
    pub fn from_quadratic(a: SymMatrix<T>, b: Vec<T>, rho: T) -> Result<Self> {
        let n = a.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        if !rho.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("ellipsoid data must be finite".into()));
        }
        let chol = Cholesky::new(&a)?;
        let center = chol.solve(&b);
        let radius_sq = rho + a.quad_form(&center);
        if !(radius_sq > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "ellipsoid has empty interior (rho + cᵀAc = {radius_sq})"
            )));
        }
        let shape = chol.inverse().scaled(radius_sq);
        Ok(Self {
            quad_a: a,
            quad_b: b,
            quad_rho: rho,
            center,
            shape,
            axis: OnceLock::new(),
        })
    }

    /// Builds `{x : (x−c)ᵀB⁻¹(x−c) ≤ 1}`; fails with `DegenerateEllipsoid` when
    /// `B` is numerically singular.
    pub fn from_center(center: Vec<T>, shape: SymMatrix<T>) -> Result<Self> {
        let n = shape.dim();
        if center.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: center.len(),
            });
        }
        let chol = Cholesky::new(&shape).map_err(|e| match e {
            Error::NotPositiveDefinite { .. } => Error::DegenerateEllipsoid,
            other => other,
        })?;
        let a = chol.inverse();
        let b = a.mul_vec(&center);
        let rho = T::one() - dot(&center, &b);
        Ok(Self {
            quad_a: a,
            quad_b: b,
            quad_rho: rho,
            center,
            shape,
            axis: OnceLock::new(),
        })
    }

    /// From a constraint record `g(x) = xᵀAx + bᵀx + c ≤ 0`.
    pub fn from_constraint(a: SymMatrix<T>, b: &[T], c: T) -> Result<Self> {
        let half = T::lit(-0.5);
        Self::from_quadratic(a, b.iter().map(|&v| v * half).collect(), -c)
    }

    /// The constraint record `(A, b, c)` with `g(x) = xᵀAx + bᵀx + c`.
    pub fn to_constraint(&self) -> (SymMatrix<T>, Vec<T>, T) {
        let two = T::lit(-2.0);
        (
            self.quad_a.clone(),
            self.quad_b.iter().map(|&v| v * two).collect(),
            -self.quad_rho,
        )
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn quad_a(&self) -> &SymMatrix<T> {
        &self.quad_a
    }

    pub fn quad_b(&self) -> &[T] {
        &self.quad_b
    }

    pub fn rho(&self) -> T {
        self.quad_rho
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    /// Shape matrix `B` of the center form.
    pub fn shape(&self) -> &SymMatrix<T> {
        &self.shape
    }

    /// `xᵀAx − 2bᵀx`
    pub fn form_value(&self, x: &[T]) -> T {
        self.quad_a.quad_form(x) - T::lit(2.0) * dot(&self.quad_b, x)
    }

    pub fn feas_tol(&self) -> T {
        T::tol(1e-9, 64.0) * (T::one() + self.quad_rho.abs())
    }

    pub fn contains(&self, x: &[T]) -> Membership<T> {
        let slack = self.form_value(x) - self.quad_rho;
        Membership {
            inside: slack <= self.feas_tol(),
            slack,
        }
    }

    /// Principal axis of `B` with the largest eigenvalue, i.e. the eigenvector of
    /// `A` for its smallest eigenvalue. Power iteration first; a Jacobi
    /// decomposition settles nearly repeated top eigenvalues.
    pub fn major_axis(&self) -> Result<MajorAxis<T>> {
        if let Some(axis) = self.axis.get() {
            return Ok(axis.clone());
        }
        let tol = T::tol(AXIS_TOL, 8.0);
        let (value, direction) = match extreme_eigenpair(&self.shape, Extreme::Largest, tol, AXIS_MAX_ITER) {
            Ok(pair) => (pair.value, pair.vector),
            Err(_) => {
                let eig = sym_eig(&self.shape)?;
                let k = eig.values.len() - 1;
                (eig.values[k], eig.vectors.column(k))
            }
        };
        let half_length = value.max(T::zero()).sqrt();
        let extreme_point = linalg::axpy(&self.center, half_length, &direction);
        let axis = MajorAxis {
            direction,
            extreme_point,
            half_length,
        };
        let _ = self.axis.set(axis.clone());
        Ok(axis)
    }

    pub fn diameter(&self) -> Result<T> {
        Ok(T::lit(2.0) * self.major_axis()?.half_length)
    }

    /// Best affine underestimate of `−‖x‖²` over the ellipsoid:
    /// `ℓ(x) = −2cᵀx + γ` with `γ = 2cᵀµ − ‖µ‖²`, error `δ²/4` attained at `c`.
    pub fn best_affine_underestimate(&self) -> Result<AffineUnderestimate<T>> {
        let axis = self.major_axis()?;
        let mu = axis.extreme_point;
        let c = &self.center;
        let offset = T::lit(2.0) * dot(c, &mu) - dot(&mu, &mu);
        Ok(AffineUnderestimate {
            slope: c.iter().map(|&v| v * T::lit(-2.0)).collect(),
            offset,
            gap: axis.half_length * axis.half_length,
            witness_mu: mu,
        })
    }

    /// Splits along the hyperplane through the center with normal `v` and
    /// returns the minimum-volume ellipsoids covering the halves
    /// `vᵀ(x−c) ≥ 0` and `vᵀ(x−c) ≤ 0`, in that order.
    pub fn bisect(&self, v: &[T]) -> Result<(Self, Self)> {
        let n = self.dim();
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
        if linalg::norm(v) == T::zero() {
            return Err(Error::InvalidInput("bisection direction must be nonzero".into()));
        }
        let bv = self.shape.mul_vec(v);
        let vbv = dot(v, &bv);
        let floor = T::epsilon() * self.shape.trace().abs() * dot(v, v);
        if !(vbv > floor) {
            return Err(Error::DegenerateDirection);
        }
        let d = linalg::scale(&bv, T::one() / vbv.sqrt());
        let nf = T::lit(n as f64);

        let (step, shape) = if n == 1 {
            // The half of a segment is itself a segment of half the length.
            (T::lit(0.5), self.shape.scaled(T::lit(0.25)))
        } else {
            let factor = nf * nf / (nf * nf - T::one());
            let rank_one = SymMatrix::outer(&d, T::lit(-2.0) / (nf + T::one()));
            (
                T::one() / (nf + T::one()),
                self.shape.add_scaled(&rank_one, T::one()).scaled(factor),
            )
        };
        let plus = Self::from_center(linalg::axpy(&self.center, step, &d), shape.clone())?;
        let minus = Self::from_center(linalg::axpy(&self.center, -step, &d), shape)?;
        Ok((plus, minus))
    }

    pub fn cast<U: Real>(&self) -> Result<Ellipsoid<U>> {
        Ellipsoid::from_quadratic(
            self.quad_a.cast(),
            self.quad_b.iter().map(|&v| U::lit(v.as_f64())).collect(),
            U::lit(self.quad_rho.as_f64()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm, sub};

    fn unit_ball(n: usize) -> Ellipsoid<f64> {
        Ellipsoid::from_quadratic(SymMatrix::identity(n), vec![0.0; n], 1.0).unwrap()
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn rejects_empty_or_indefinite() {
        assert!(Ellipsoid::from_quadratic(SymMatrix::identity(2), vec![0.0; 2], -1.0).is_err());
        assert!(Ellipsoid::from_quadratic(SymMatrix::diagonal(&[1.0, -1.0]), vec![0.0; 2], 1.0).is_err());
        assert!(matches!(
            Ellipsoid::from_quadratic(SymMatrix::identity(2), vec![0.0; 3], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn center_and_shape_of_shifted_ball() {
        // ‖x − (1,0)‖² ≤ 4  ⇔  xᵀx − 2(1,0)ᵀx ≤ 3
        let e = Ellipsoid::from_quadratic(SymMatrix::identity(2), vec![1.0, 0.0], 3.0).unwrap();
        assert_eq!(e.center(), &[1.0, 0.0]);
        assert_close(e.shape().get(0, 0), 4.0, 1e-14);
        let back = Ellipsoid::from_center(e.center().to_vec(), e.shape().clone()).unwrap();
        for x in [[0.0, 0.0], [2.9, 0.0], [3.1, 0.0], [1.0, 2.01]] {
            assert_eq!(e.contains(&x).inside, back.contains(&x).inside);
        }
    }

    #[test]
    fn constraint_round_trip() {
        let e = Ellipsoid::from_constraint(SymMatrix::identity(2), &[-2.0, 0.0], -3.0).unwrap();
        assert_eq!(e.center(), &[1.0, 0.0]);
        let (a, b, c) = e.to_constraint();
        assert_eq!(a, SymMatrix::identity(2));
        assert_eq!(b, vec![-2.0, 0.0]);
        assert_eq!(c, -3.0);
    }

    #[test]
    fn membership() {
        let e = unit_ball(2);
        let m = e.contains(&[0.0, 0.0]);
        assert!(m.inside);
        assert_eq!(m.slack, -1.0);
        let m = e.contains(&[2.0, 0.0]);
        assert!(!m.inside);
        assert_eq!(m.slack, 3.0);
        let axis = e.major_axis().unwrap();
        assert!(e.contains(&axis.extreme_point).inside);
        assert!(e.contains(&axis.extreme_point).slack.abs() <= 1e-8);
    }

    #[test]
    fn bisect_unit_disk() {
        let (p, m) = unit_ball(2).bisect(&[1.0, 0.0]).unwrap();
        assert_close(p.center()[0], 1.0 / 3.0, 1e-15);
        assert_close(m.center()[0], -1.0 / 3.0, 1e-15);
        assert_eq!(p.center()[1], 0.0);
        for e in [&p, &m] {
            assert_close(e.shape().get(0, 0), 4.0 / 9.0, 1e-15);
            assert_close(e.shape().get(1, 1), 4.0 / 3.0, 1e-15);
            assert_eq!(e.shape().get(0, 1), 0.0);
        }
    }

    #[test]
    fn bisect_unit_ball_3d() {
        let (p, m) = unit_ball(3).bisect(&[0.0, 1.0, 0.0]).unwrap();
        assert_close(p.center()[1], 0.25, 1e-15);
        assert_close(m.center()[1], -0.25, 1e-15);
        for (k, want) in [9.0 / 8.0, 9.0 / 16.0, 9.0 / 8.0].into_iter().enumerate() {
            assert_close(p.shape().get(k, k), want, 1e-15);
        }
    }

    #[test]
    fn bisect_segment() {
        let e = Ellipsoid::from_quadratic(SymMatrix::identity(1), vec![0.0], 1.0).unwrap();
        let (p, m) = e.bisect(&[1.0]).unwrap();
        assert_close(p.center()[0], 0.5, 1e-15);
        assert_close(m.center()[0], -0.5, 1e-15);
        assert_close(p.shape().get(0, 0), 0.25, 1e-15);
    }

    #[test]
    fn bisect_rejects_zero_direction() {
        assert!(unit_ball(2).bisect(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn collapsed_shape_is_degenerate() {
        let shape = SymMatrix::diagonal(&[1.0, 1e-20]);
        assert!(matches!(
            Ellipsoid::from_center(vec![0.0, 0.0], shape),
            Err(Error::DegenerateEllipsoid)
        ));
    }

    #[test]
    fn major_axis_of_axis_aligned() {
        let e = Ellipsoid::from_quadratic(SymMatrix::diagonal(&[1.0, 4.0]), vec![0.0; 2], 1.0).unwrap();
        let axis = e.major_axis().unwrap();
        assert_close(axis.half_length, 1.0, 1e-12);
        assert_close(axis.direction[0].abs(), 1.0, 1e-10);
        assert_close(axis.extreme_point[0].abs(), 1.0, 1e-10);
        assert_close(e.diameter().unwrap(), 2.0, 1e-12);
        assert_close(unit_ball(2).diameter().unwrap(), 2.0, 1e-12);
    }

    #[test]
    fn unit_ball_underestimate() {
        let u = unit_ball(3).best_affine_underestimate().unwrap();
        assert!(u.slope.iter().all(|&s| s == 0.0));
        assert_close(u.offset, -1.0, 1e-12);
        assert_close(u.gap, 1.0, 1e-12);
    }

    #[test]
    fn shifted_ball_underestimate() {
        let e = Ellipsoid::from_quadratic(SymMatrix::identity(2), vec![1.0, 0.0], 0.0).unwrap();
        let u = e.best_affine_underestimate().unwrap();
        assert_eq!(u.slope, vec![-2.0, 0.0]);
        assert_close(u.offset, 0.0, 1e-12);
        assert_close(u.gap, 1.0, 1e-12);
        let at_center = -(norm(e.center()).powi(2) + u.evaluate(e.center()));
        assert_close(at_center, u.gap, 1e-12);
        assert_close(norm(&sub(&u.witness_mu, e.center())), 1.0, 1e-10);
    }
}
