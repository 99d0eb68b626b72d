//! Seeded random test instances.
//!
//! Convex instances follow the Lin–Han recipe: every matrix is `UDUᵀ` with
//! `U` a product of three random Householder reflections, and the constraint
//! constants are chosen so that a random point `p` is strictly feasible.
//! Indefinite instances use ellipsoids `(x − cᵢ)ᵀBᵢ⁻¹(x − cᵢ) ≤ 1` whose
//! centers are placed to force a common point.

use crate::convex::{QuadConstraint, Quadratic};
use crate::error::{Error, Result};
use crate::linalg::{self, dot, Matrix, SymMatrix};
use crate::problem::{Convexity, Qcqp};
use crate::rng::Rand;
use crate::scalar::Real;

/// Instance recipe. Draws are made from one seeded stream in a fixed order, so
/// the same spec always yields the same instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub n: usize,
    pub m: usize,
    pub kind: Convexity,
    pub seed: u64,
    /// Range of the objective's eigenvalues.
    pub objective_eigs: (f64, f64),
    /// Range of the constraint eigenvalues (of `Aᵢ` for convex kinds, of `Bᵢ`
    /// for the indefinite kind).
    pub constraint_eigs: (f64, f64),
}

impl GenSpec {
    pub fn new(kind: Convexity, n: usize, m: usize, seed: u64) -> Self {
        let (objective_eigs, constraint_eigs) = match kind {
            Convexity::Convex | Convexity::Psd => ((0.0, 100.0), (0.0, 100.0)),
            Convexity::Indefinite => ((-30.0, 30.0), (0.0, 60.0)),
        };
        Self {
            n,
            m,
            kind,
            seed,
            objective_eigs,
            constraint_eigs,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidInput(format!(
                "instance needs n >= 1 and m >= 1 (got n={}, m={})",
                self.n, self.m
            )));
        }
        let (lo, hi) = self.constraint_eigs;
        if !(lo >= 0.0 && hi > lo) || !(self.objective_eigs.1 > self.objective_eigs.0) {
            return Err(Error::InvalidInput("invalid eigenvalue ranges".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Instance<T> {
    pub problem: Qcqp<T>,
    pub spec: GenSpec,
    /// Known strictly feasible point: `p` for convex kinds, `c₂` (or `c₁` when
    /// `m = 1`) for the indefinite kind.
    pub planted: Vec<T>,
}

fn householder_product<T: Real>(rng: &mut Rand, n: usize) -> Matrix<T> {
    let mut u = Matrix::identity(n);
    for _ in 0..3 {
        let mut v: Vec<T> = rng.vector(n, -1.0, 1.0);
        linalg::normalize(&mut v);
        // U ← U(I − 2vvᵀ)
        let uv = u.mul_vec(&v);
        for i in 0..n {
            for j in 0..n {
                u[(i, j)] -= T::lit(2.0) * uv[i] * v[j];
            }
        }
    }
    u
}

/// Random orthogonal `U = Q₁Q₂Q₃`, `Qᵢ = I − 2vᵢvᵢᵀ` with `vᵢ` normalized
/// `Rand(n, −1, 1)` vectors.
pub fn rand_orthogonal<T: Real>(n: usize, seed: u64) -> Matrix<T> {
    householder_product(&mut Rand::new(seed), n)
}

pub fn generate<T: Real>(spec: &GenSpec) -> Result<Instance<T>> {
    match spec.kind {
        Convexity::Convex | Convexity::Psd => gen_convex(spec),
        Convexity::Indefinite => gen_indefinite(spec),
    }
}

pub fn gen_convex<T: Real>(spec: &GenSpec) -> Result<Instance<T>> {
    spec.validate()?;
    if spec.kind == Convexity::Indefinite {
        return Err(Error::InvalidInput("gen_convex needs a convex or psd spec".into()));
    }
    let n = spec.n;
    let mut rng = Rand::new(spec.seed);
    let u = householder_product::<T>(&mut rng, n);

    let (lo, hi) = spec.objective_eigs;
    let mut d0: Vec<T> = rng.vector(n, lo, hi);
    if spec.kind == Convexity::Psd {
        d0[rng.index(n)] = T::zero();
    }
    let b0: Vec<T> = rng.vector(n, -100.0, 100.0);
    let objective = Quadratic::new(SymMatrix::from_spectrum(&u, &d0)?, b0)?;

    let p: Vec<T> = rng.vector(n, -50.0, 50.0);
    let (lo, hi) = spec.constraint_eigs;
    let mut constraints = Vec::with_capacity(spec.m);
    for _ in 0..spec.m {
        let d: Vec<T> = rng.vector(n, lo, hi);
        let b: Vec<T> = rng.vector(n, -100.0, 100.0);
        let s = T::lit(rng.uniform(0.0, 10.0));
        let a = SymMatrix::from_spectrum(&u, &d)?;
        let c = -(a.quad_form(&p) + dot(&b, &p) + s);
        constraints.push(QuadConstraint::new(a, b, c)?);
    }
    Ok(Instance {
        problem: Qcqp::new(objective, constraints)?,
        spec: *spec,
        planted: p,
    })
}

/// `(x − c)ᵀB⁻¹(x − c) − 1` with `B = U·diag(d)·Uᵀ`.
fn centered_ellipsoid<T: Real>(u: &Matrix<T>, d: &[T], center: &[T]) -> Result<QuadConstraint<T>> {
    let inv: Vec<T> = d.iter().map(|&v| T::one() / v).collect();
    let a = SymMatrix::from_spectrum(u, &inv)?;
    let ac = a.mul_vec(center);
    let b = linalg::scale(&ac, T::lit(-2.0));
    let c = dot(&ac, center) - T::one();
    QuadConstraint::new(a, b, c)
}

pub fn gen_indefinite<T: Real>(spec: &GenSpec) -> Result<Instance<T>> {
    spec.validate()?;
    if spec.kind != Convexity::Indefinite {
        return Err(Error::InvalidInput("gen_indefinite needs an indefinite spec".into()));
    }
    let n = spec.n;
    let mut rng = Rand::new(spec.seed);
    let u = householder_product::<T>(&mut rng, n);

    let (lo, hi) = spec.objective_eigs;
    let d0: Vec<T> = rng.vector(n, lo, hi);
    let b0: Vec<T> = rng.vector(n, -1.0, 1.0);
    let objective = Quadratic::new(SymMatrix::from_spectrum(&u, &d0)?, b0)?;

    let (lo, hi) = spec.constraint_eigs;
    let d1: Vec<T> = rng.vector(n, lo, hi);
    let c1: Vec<T> = rng.vector(n, 0.0, 100.0);
    let mut constraints = vec![centered_ellipsoid(&u, &d1, &c1)?];

    // Semi-major axis of the first ellipsoid: the column of U paired with the
    // largest entry of d₁, scaled to the boundary.
    let (k, &dmax) = d1
        .iter()
        .enumerate()
        .fold((0, &d1[0]), |best, (i, v)| if *v > *best.1 { (i, v) } else { best });
    let v = linalg::scale(&u.column(k), dmax.sqrt());
    let shift = T::lit(0.8);
    let c2 = linalg::axpy(&c1, shift, &v);
    for i in 1..spec.m {
        let d: Vec<T> = rng.vector(n, lo, hi);
        let center = if i == 1 {
            c2.clone()
        } else {
            // Fresh direction w from c₂, stepped 0.8 of the way to the boundary
            // of this ellipsoid, so c₂ stays inside every constraint.
            let mut w: Vec<T> = rng.vector(n, -1.0, 1.0);
            linalg::normalize(&mut w);
            let inv: Vec<T> = d.iter().map(|&v| T::one() / v).collect();
            let reach = T::one() / SymMatrix::from_spectrum(&u, &inv)?.quad_form(&w).sqrt();
            linalg::axpy(&c2, shift * reach, &w)
        };
        constraints.push(centered_ellipsoid(&u, &d, &center)?);
    }
    let planted = if spec.m == 1 { c1 } else { c2 };
    Ok(Instance {
        problem: Qcqp::new(objective, constraints)?,
        spec: *spec,
        planted,
    })
}
