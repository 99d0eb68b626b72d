//! Dense linear algebra kernels: symmetric eigensolvers, Cholesky, and the
//! handful of vector operations the solvers need.

use crate::error::{Error, Result};
use crate::rng::Rand;
use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x`
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Square matrix with exactly symmetric storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T>(Matrix<T>);

impl<T: Real> SymMatrix<T> {
    /// Symmetrizes `m` as `(m + mᵀ)/2`.
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch {
                expected: m.rows,
                found: m.cols,
            });
        }
        if m.rows == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        let n = m.rows;
        let mut s = m;
        let half = T::lit(0.5);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (s[(i, j)] + s[(j, i)]) * half;
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Ok(Self(s))
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n, n))
    }

    pub fn diagonal(d: &[T]) -> Self {
        let mut m = Matrix::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        Self(m)
    }

    /// `U diag(d) Uᵀ`
    pub fn from_spectrum(u: &Matrix<T>, d: &[T]) -> Result<Self> {
        let n = d.len();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc += u[(i, k)] * d[k] * u[(j, k)];
                }
                m[(i, j)] = acc;
                m[(j, i)] = acc;
            }
        }
        Self::new(m)
    }

    /// `scale * v vᵀ`
    pub fn outer(v: &[T], scale: T) -> Self {
        let n = v.len();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = scale * v[i] * v[j];
            }
        }
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.0[(i, j)]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        self.0.mul_vec(x)
    }

    /// `xᵀ M x`
    pub fn quad_form(&self, x: &[T]) -> T {
        dot(x, &self.mul_vec(x))
    }

    pub fn frobenius(&self) -> T {
        self.0.frobenius()
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut m = self.0.clone();
        m.data.iter_mut().for_each(|v| *v *= s);
        Self(m)
    }

    /// `self + s I`
    pub fn shifted(&self, s: T) -> Self {
        let mut m = self.0.clone();
        for i in 0..self.dim() {
            m[(i, i)] += s;
        }
        Self(m)
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &Self, s: T) -> Self {
        let mut m = self.0.clone();
        for (a, &b) in m.data.iter_mut().zip(&other.0.data) {
            *a += s * b;
        }
        Self(m)
    }

    /// Max absolute asymmetry of the raw matrix before symmetrization.
    pub fn asymmetry(m: &Matrix<T>) -> T {
        let mut worst = T::zero();
        for i in 0..m.rows {
            for j in 0..m.cols.min(m.rows) {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    /// Gershgorin interval `[lo, hi]` containing the spectrum.
    pub fn gershgorin(&self) -> (T, T) {
        let n = self.dim();
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for i in 0..n {
            let radius: T = (0..n).filter(|&j| j != i).map(|j| self.get(i, j).abs()).sum();
            lo = lo.min(self.get(i, i) - radius);
            hi = hi.max(self.get(i, i) + radius);
        }
        (lo, hi)
    }

    pub fn cast<U: Real>(&self) -> SymMatrix<U> {
        SymMatrix(self.0.cast())
    }
}

/// Eigendecomposition `M = V diag(values) Vᵀ`, values ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig<T> {
    pub values: Vec<T>,
    /// Orthogonal matrix whose column `k` pairs with `values[k]`.
    pub vectors: Matrix<T>,
}

impl<T: Real> SymEig<T> {
    pub fn min(&self) -> T {
        self.values[0]
    }

    pub fn max(&self) -> T {
        self.values[self.values.len() - 1]
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig<T: Real>(m: &SymMatrix<T>) -> Result<SymEig<T>> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = m.dim();
    let mut a = m.matrix().clone();
    let mut v = Matrix::identity(n);
    let scale = m.frobenius();
    let target = (T::epsilon() * scale) * (T::epsilon() * scale);

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off <= target || off == T::zero() {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let off: T = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        return Err(Error::ConvergenceFailure {
            iterations: JACOBI_MAX_SWEEPS,
            residual: off.sqrt().as_f64(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymEig { values, vectors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Largest,
    Smallest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair<T> {
    pub value: T,
    /// Unit vector.
    pub vector: Vec<T>,
    pub residual: T,
    pub iterations: usize,
}

/// Power iteration did not reach the requested residual; carries the best pair seen.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFailure<T> {
    pub best: EigenPair<T>,
}

impl<T: Real> From<PowerFailure<T>> for Error {
    fn from(f: PowerFailure<T>) -> Self {
        Error::ConvergenceFailure {
            iterations: f.best.iterations,
            residual: f.best.residual.as_f64(),
        }
    }
}

const STAGNATION_WINDOW: usize = 10;
// Start vectors come from a fixed stream so results are reproducible.
const START_SEED: u64 = 0x5eed_e11d;

/// Extreme eigenpair by power iteration.
///
/// `Smallest` iterates on `sI − M` and `Largest` on `M − lI`, where `[l, s]`
/// is the Gershgorin interval, so the wanted eigenvalue is dominant. Stops when
/// `‖Mv − λv‖ ≤ tol·(1 + |λ|)`. If the Rayleigh quotient settles while the
/// residual stays above that bound and no longer shrinks (a nearly repeated
/// extreme eigenvalue), the iteration restarts once from a fresh vector.
pub fn extreme_eigenpair<T: Real>(
    m: &SymMatrix<T>,
    which: Extreme,
    tol: T,
    max_iter: usize,
) -> std::result::Result<EigenPair<T>, PowerFailure<T>> {
    let n = m.dim();
    let (lo, hi) = m.gershgorin();
    let apply = |v: &[T]| -> Vec<T> {
        let mv = m.mul_vec(v);
        match which {
            Extreme::Smallest => v.iter().zip(&mv).map(|(&vi, &mi)| hi * vi - mi).collect(),
            Extreme::Largest => v.iter().zip(&mv).map(|(&vi, &mi)| mi - lo * vi).collect(),
        }
    };
    let mut rng = Rand::new(START_SEED);
    let fresh_start = |rng: &mut Rand| -> Vec<T> {
        let mut v: Vec<T> = rng.vector(n, -1.0, 1.0);
        normalize(&mut v);
        v
    };

    let mut v = fresh_start(&mut rng);
    let mut best = EigenPair {
        value: T::nan(),
        vector: v.clone(),
        residual: T::infinity(),
        iterations: 0,
    };
    let mut restarted = false;
    let mut prev_rq = T::nan();
    let mut prev_residual = T::infinity();
    let mut flat = 0usize;
    let slow = T::one() - T::lit(1e-3);

    for it in 0..=max_iter {
        let mv = m.mul_vec(&v);
        let rq = dot(&v, &mv);
        let residual = mv
            .iter()
            .zip(&v)
            .map(|(&a, &b)| (a - rq * b) * (a - rq * b))
            .sum::<T>()
            .sqrt();
        if residual < best.residual || best.value.is_nan() {
            best = EigenPair {
                value: rq,
                vector: v.clone(),
                residual,
                iterations: it,
            };
        }
        if residual <= tol * (T::one() + rq.abs()) {
            return Ok(EigenPair {
                value: rq,
                vector: v,
                residual,
                iterations: it,
            });
        }
        if (rq - prev_rq).abs() < tol * (T::one() + rq.abs()) && residual > prev_residual * slow {
            flat += 1;
        } else {
            flat = 0;
        }
        prev_rq = rq;
        prev_residual = residual;
        if flat >= STAGNATION_WINDOW {
            if restarted {
                return Err(PowerFailure { best });
            }
            restarted = true;
            flat = 0;
            prev_rq = T::nan();
            prev_residual = T::infinity();
            v = fresh_start(&mut rng);
            continue;
        }
        let mut w = apply(&v);
        if normalize(&mut w) == T::zero() {
            return Err(PowerFailure { best });
        }
        v = w;
    }
    best.iterations = max_iter;
    Err(PowerFailure { best })
}

/// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Fails when a pivot drops below `1e-14·trace(M)/n`.
    pub fn new(m: &SymMatrix<T>) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let n = m.dim();
        let floor = T::tol(1e-14, 4.0) * m.trace().abs() / T::lit(n as f64);
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = m.get(j, j);
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > floor) {
                return Err(Error::NotPositiveDefinite {
                    row: j,
                    pivot: d.as_f64(),
                });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.l.rows();
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    pub fn inverse(&self) -> SymMatrix<T> {
        let n = self.l.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        SymMatrix::new(inv).expect("square")
    }

    pub fn log_det(&self) -> T {
        let n = self.l.rows();
        (0..n).map(|i| self.l[(i, i)].ln()).sum::<T>() * T::lit(2.0)
    }
}

/// Solves `M x = rhs` for symmetric positive definite `M`.
pub fn solve_spd<T: Real>(m: &SymMatrix<T>, rhs: &[T]) -> Result<Vec<T>> {
    if rhs.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: rhs.len(),
        });
    }
    Ok(Cholesky::new(m)?.solve(rhs))
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn norm_inf<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

pub fn dist_sq<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn scale<T: Real>(a: &[T], s: T) -> Vec<T> {
    a.iter().map(|&x| x * s).collect()
}

/// `a + s·b`
pub fn axpy<T: Real>(a: &[T], s: T, b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

/// `(1 − t)a + t b`
pub fn lerp<T: Real>(a: &[T], b: &[T], t: T) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + t * (y - x)).collect()
}

/// Normalizes in place and returns the original norm.
pub fn normalize<T: Real>(v: &mut [T]) -> T {
    let nrm = norm(v);
    if nrm > T::zero() && nrm.is_finite() {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}
