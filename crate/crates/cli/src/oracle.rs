//! Brute-force reference optimum for small problems: an exhaustive grid over
//! the bounding box of the first constraint's ellipsoid, then projected
//! gradient polishing from the best feasible grid points.

use std::thread;

use ebl_core::local::{projected_gradient, PgOptions};
use ebl_core::phase1::{find_feasible, Feasibility};
use ebl_core::Qcqp64;
use serde::Serialize;

use crate::error::CliError;

pub const MAX_DIM: usize = 6;
const POLISH_STARTS: usize = 10;
const POINT_CAP: f64 = 1e8;

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    /// Best objective value found (grid or polished).
    pub value: f64,
    pub x: Vec<f64>,
    /// Best objective over feasible grid points, if any were feasible.
    pub grid_value: Option<f64>,
    pub feasible_points: u64,
    pub resolution: usize,
}

/// Largest resolution up to 400 keeping the grid under 10⁸ points.
pub fn default_resolution(n: usize) -> usize {
    let r = POINT_CAP.powf(1.0 / n as f64).floor() as usize;
    r.clamp(2, 400)
}

/// Keeps the `cap` lowest-valued points.
struct Best {
    cap: usize,
    items: Vec<(f64, Vec<f64>)>,
}

impl Best {
    fn new(cap: usize) -> Self {
        Self { cap, items: Vec::new() }
    }

    fn worst(&self) -> f64 {
        if self.items.len() < self.cap {
            f64::INFINITY
        } else {
            self.items.last().map_or(f64::INFINITY, |p| p.0)
        }
    }

    fn offer(&mut self, v: f64, x: &[f64]) {
        if v >= self.worst() {
            return;
        }
        let at = self.items.partition_point(|p| p.0 <= v);
        self.items.insert(at, (v, x.to_vec()));
        self.items.truncate(self.cap);
    }

    fn merge(mut self, other: Best) -> Best {
        for (v, x) in other.items {
            self.offer(v, &x);
        }
        self
    }
}

pub fn grid_oracle(problem: &Qcqp64, resolution: usize) -> Result<OracleResult, CliError> {
    let n = problem.dim();
    if n > MAX_DIM {
        return Err(CliError::Usage(format!(
            "the grid oracle is limited to n <= {MAX_DIM} (problem has n = {n})"
        )));
    }
    if resolution < 2 {
        return Err(CliError::Usage("resolution must be at least 2".into()));
    }
    let e1 = problem.ellipsoid(0)?;
    let center = e1.center().to_vec();
    let half: Vec<f64> = (0..n).map(|j| e1.shape().get(j, j).max(0.0).sqrt()).collect();
    let step: Vec<f64> = half.iter().map(|h| 2.0 * h / (resolution - 1) as f64).collect();
    let coord = |j: usize, k: usize| center[j] - half[j] + step[j] * k as f64;

    let threads = thread::available_parallelism().map_or(1, |p| p.get()).min(resolution);
    let per_axis = resolution;
    let inner: u64 = (per_axis as u64).pow(n as u32 - 1);
    let (best, feasible) = thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let coord = &coord;
                scope.spawn(move || {
                    let mut best = Best::new(POLISH_STARTS);
                    let mut feasible = 0u64;
                    let mut x = vec![0.0; n];
                    let mut idx = vec![0usize; n];
                    for k0 in (t..per_axis).step_by(threads) {
                        x[0] = coord(0, k0);
                        idx[1..].iter_mut().for_each(|i| *i = 0);
                        for j in 1..n {
                            x[j] = coord(j, 0);
                        }
                        for _ in 0..inner {
                            if problem.constraints().iter().all(|g| g.value(&x) <= 0.0) {
                                feasible += 1;
                                best.offer(problem.value(&x), &x);
                            }
                            // Odometer over axes 1..n.
                            let mut j = n - 1;
                            while j >= 1 {
                                idx[j] += 1;
                                if idx[j] < per_axis {
                                    x[j] = coord(j, idx[j]);
                                    break;
                                }
                                idx[j] = 0;
                                x[j] = coord(j, 0);
                                j -= 1;
                            }
                        }
                    }
                    (best, feasible)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("oracle worker panicked"))
            .fold((Best::new(POLISH_STARTS), 0u64), |(b, f), (b2, f2)| (b.merge(b2), f + f2))
    });

    let grid_value = best.items.first().map(|p| p.0);
    let mut starts: Vec<Vec<f64>> = best.items.iter().map(|p| p.1.clone()).collect();
    if starts.is_empty() {
        match find_feasible(problem.constraints())? {
            Feasibility::Feasible(x) => starts.push(x),
            Feasibility::Infeasible { .. } => return Err(CliError::Infeasible("feasible set is empty".into())),
        }
    }
    let mut value = grid_value.unwrap_or(f64::INFINITY);
    let mut x = best.items.first().map(|p| p.1.clone()).unwrap_or_else(|| starts[0].clone());
    let opts = PgOptions {
        tol: 1e-6,
        max_iter: 5000,
        ..PgOptions::default()
    };
    for s in &starts {
        if let Ok(r) = projected_gradient(problem, s, &opts) {
            if r.objective < value {
                value = r.objective;
                x = r.x;
            }
        }
    }
    Ok(OracleResult {
        value,
        x,
        grid_value,
        feasible_points: feasible,
        resolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ebl_core::{QuadConstraint64, Quadratic64, SymMatrix64};

    fn ball_problem(a: SymMatrix64, b: Vec<f64>) -> Qcqp64 {
        let n = b.len();
        let g = QuadConstraint64::new(SymMatrix64::identity(n), vec![0.0; n], -1.0).unwrap();
        Qcqp64::new(Quadratic64::new(a, b).unwrap(), vec![g]).unwrap()
    }

    #[test]
    fn negative_norm_on_disk() {
        let p = ball_problem(SymMatrix64::identity(2).scaled(-1.0), vec![0.0; 2]);
        let r = grid_oracle(&p, 101).unwrap();
        assert!((r.value + 1.0).abs() < 1e-5, "{r:?}");
        assert!(r.grid_value.unwrap() >= r.value);
    }

    #[test]
    fn coarse_grid_is_still_an_upper_bound() {
        // min of ‖x‖² − 6x₁ on the unit disk is −5 at (1, 0).
        let p = ball_problem(SymMatrix64::identity(2), vec![-6.0, 0.0]);
        let r = grid_oracle(&p, 2).unwrap();
        assert!(r.value >= -5.0 - 1e-9);
        assert!(r.value <= -5.0 + 1e-4, "{r:?}");
    }

    #[test]
    fn refuses_large_dimension() {
        let p = ball_problem(SymMatrix64::identity(7), vec![0.0; 7]);
        assert!(matches!(grid_oracle(&p, 3), Err(CliError::Usage(_))));
    }

    #[test]
    fn resolution_caps_grid_size() {
        assert_eq!(default_resolution(2), 400);
        assert_eq!(default_resolution(3), 400);
        assert!((default_resolution(5) as f64).powi(5) <= 1e8);
    }
}
