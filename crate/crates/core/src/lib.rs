//! Global optimization of quadratic programs over intersections of ellipsoids.
//!
//! Nonconvex problems are solved by ellipsoidal branch and bound with an
//! affine underestimate of the concave part of the objective. The convex
//! relaxations, and convex problems in their own right, are solved by the ball
//! approximation algorithm.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*64` and `*32`
//! aliases below name the usual instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod convex;
pub mod bnb;
pub mod ellipsoid;
pub mod error;
pub mod linalg;
pub mod local;
pub mod phase1;
pub mod probgen;
pub mod problem;
pub mod rng;
pub mod scalar;

pub use bnb::{ebl_solve, DcDecomposition, EblOptions, GlobalSolveReport, GlobalTermination};
pub use convex::{BaaOptions, ConvexQcqp, ConvexSolveReport, QuadConstraint, Quadratic};
pub use ellipsoid::{AffineUnderestimate, Ellipsoid};
pub use error::{Error, Result};
pub use linalg::{Matrix, SymMatrix};
pub use phase1::{find_feasible, find_feasible_in, Feasibility};
pub use local::{projected_gradient, LocalSolveReport, PgOptions, Projector};
pub use probgen::{GenSpec, Instance};
pub use problem::{Convexity, Qcqp};
pub use rng::Rand;
pub use scalar::Real;

pub type Matrix64 = Matrix<f64>;
pub type SymMatrix64 = SymMatrix<f64>;
pub type Ellipsoid64 = Ellipsoid<f64>;
pub type Quadratic64 = Quadratic<f64>;
pub type QuadConstraint64 = QuadConstraint<f64>;
pub type ConvexQcqp64 = ConvexQcqp<f64>;
pub type Qcqp64 = Qcqp<f64>;

pub type Matrix32 = Matrix<f32>;
pub type SymMatrix32 = SymMatrix<f32>;
pub type Ellipsoid32 = Ellipsoid<f32>;
pub type Quadratic32 = Quadratic<f32>;
pub type QuadConstraint32 = QuadConstraint<f32>;
pub type ConvexQcqp32 = ConvexQcqp<f32>;
pub type Qcqp32 = Qcqp<f32>;
