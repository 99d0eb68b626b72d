//! Ellipsoidal branch and bound with an affine underestimate of the concave
//! part of the objective.
//!
//! With `f(x) = xᵀA₀x + b₀ᵀx` and `σ` such that `A₀ + σI` is positive
//! definite, `f = (f + σ‖x‖²) − σ‖x‖²`. On an ellipsoid `E` the concave term is
//! replaced by `σℓ*`, the best affine underestimate of `−‖x‖²` on `E`, giving
//! the convex `f_L ≤ f` whose minimum over `E ∩ Ω` is the node bound `M_L`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::convex::baa::run as baa_run;
use crate::convex::{BaaOptions, DiagonalizedObjective, QuadConstraint, Quadratic};
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::linalg::{self, SymEig, SymMatrix};
use crate::local::{projected_gradient, PgOptions};
use crate::phase1::{find_feasible, find_feasible_in_constraint, Feasibility};
use crate::problem::{Convexity, Qcqp};
use crate::scalar::Real;

const SIGMA_FLOOR: f64 = 0.1;

/// Shift `σ` making `A₀ + σI` strongly convex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcDecomposition<T> {
    pub sigma: T,
}

/// `σ = max{0, 0.1 − λ_min(A₀)}`.
pub fn dc_sigma<T: Real>(spectrum: &SymEig<T>) -> DcDecomposition<T> {
    let lo = spectrum.min();
    let floor = T::lit(SIGMA_FLOOR);
    DcDecomposition {
        sigma: if lo < floor { floor - lo } else { T::zero() },
    }
}

/// The decomposition used by [`ebl_solve`]: the rule of [`dc_sigma`] for
/// indefinite objectives and `σ = 0` for convex ones, where `f` is already its
/// own convex underestimate.
pub fn problem_sigma<T: Real>(problem: &Qcqp<T>) -> DcDecomposition<T> {
    match problem.class() {
        Convexity::Indefinite => dc_sigma(problem.spectrum()),
        Convexity::Convex | Convexity::Psd => DcDecomposition { sigma: T::zero() },
    }
}

/// The first constraint's ellipsoid, which contains the feasible set.
pub fn initial_ellipsoid<T: Real>(problem: &Qcqp<T>) -> Result<Ellipsoid<T>> {
    problem.ellipsoid(0)
}

/// Unit vector along the major axis of `e`.
pub fn branch_direction<T: Real>(e: &Ellipsoid<T>) -> Result<Vec<T>> {
    Ok(e.major_axis()?.direction)
}

/// Result of bounding one ellipsoid.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeBound<T> {
    /// `M_L`; `+∞` when `E ∩ Ω` is certified empty.
    pub value: T,
    /// Minimizer of `f_L` over `E ∩ Ω`.
    pub y: Option<Vec<T>>,
    pub multipliers: Vec<T>,
    /// `σ·δ(E)²/4`, the worst-case gap `f − f_L` on `E`.
    pub gap_bound: T,
    /// Feasibility of `E ∩ Ω` could not be decided or the bound solve failed.
    pub ambiguous: bool,
}

/// `f_L = xᵀ(A₀ + σI)x + (b₀ − 2σc)ᵀx + σγ` for the underestimate on `e`.
fn underestimator<T: Real>(problem: &Qcqp<T>, dc: DcDecomposition<T>, e: &Ellipsoid<T>) -> Result<(Quadratic<T>, T, T)> {
    let f = problem.objective();
    let s = dc.sigma;
    if s == T::zero() {
        return Ok((f.clone(), T::zero(), T::zero()));
    }
    let ell = e.best_affine_underestimate()?;
    let q = Quadratic::new(f.a.shifted(s), linalg::axpy(&f.b, s, &ell.slope))?;
    Ok((q, s * ell.offset, s * ell.gap))
}

fn shifted_spectrum<T: Real>(spectrum: &SymEig<T>, sigma: T) -> SymEig<T> {
    SymEig {
        values: spectrum.values.iter().map(|&v| v + sigma).collect(),
        vectors: spectrum.vectors.clone(),
    }
}

/// `M_L` over `e ∩ Ω`, starting from `start ∈ Ω`. `warm` seeds the dual
/// multipliers of the `m + 1` constraints (Ω first, then `e`).
pub fn lower_bound<T: Real>(
    e: &Ellipsoid<T>,
    problem: &Qcqp<T>,
    dc: DcDecomposition<T>,
    start: &[T],
    warm: &[T],
    opts: &BaaOptions<T>,
) -> Result<NodeBound<T>> {
    bound_node(e, problem, dc, start, warm, opts, true)
}

fn bound_node<T: Real>(
    e: &Ellipsoid<T>,
    problem: &Qcqp<T>,
    dc: DcDecomposition<T>,
    start: &[T],
    warm: &[T],
    opts: &BaaOptions<T>,
    append: bool,
) -> Result<NodeBound<T>> {
    let (fl, constant, gap_bound) = underestimator(problem, dc, e)?;
    let mut constraints = problem.constraints().to_vec();
    let x0 = if append {
        let (a, b, c) = e.to_constraint();
        let g = QuadConstraint::new(a, b, c)?;
        let x0 = match find_feasible_in_constraint(&g, &constraints, start) {
            Ok(Feasibility::Feasible(x)) => x,
            Ok(Feasibility::Infeasible { .. }) => {
                return Ok(NodeBound {
                    value: T::infinity(),
                    y: None,
                    multipliers: Vec::new(),
                    gap_bound,
                    ambiguous: false,
                })
            }
            Err(Error::AmbiguousFeasibility { .. }) => {
                return Ok(NodeBound {
                    value: T::neg_infinity(),
                    y: None,
                    multipliers: Vec::new(),
                    gap_bound,
                    ambiguous: true,
                })
            }
            Err(err) => return Err(err),
        };
        constraints.push(g);
        x0
    } else {
        start.to_vec()
    };
    let diag = DiagonalizedObjective::new(&fl, &shifted_spectrum(problem.spectrum(), dc.sigma));
    let report = baa_run(&fl, &diag, &constraints, &x0, opts, warm)?;
    Ok(NodeBound {
        value: report.objective + constant,
        y: Some(report.x),
        multipliers: report.multipliers,
        gap_bound,
        ambiguous: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EblOptions<T> {
    pub eps_abs: T,
    pub eps_rel: T,
    /// Maximum number of bisections.
    pub node_budget: usize,
    pub baa: BaaOptions<T>,
    /// Iteration budget of each local upper-bound solve.
    pub local_iter: usize,
    /// Bound the two children of a bisection on separate threads.
    pub parallel: bool,
    /// Keep the ellipsoid center and shape in every [`NodeRecord`].
    pub record_geometry: bool,
}

impl<T: Real> Default for EblOptions<T> {
    fn default() -> Self {
        Self {
            eps_abs: T::lit(1e-5),
            eps_rel: T::lit(1e-2),
            node_budget: 10_000,
            baa: BaaOptions::default(),
            local_iter: 500,
            parallel: true,
            record_geometry: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GlobalTermination {
    GapClosed,
    NodeBudget,
    Degenerate,
    Infeasible,
}

impl GlobalTermination {
    pub fn as_str(&self) -> &'static str {
        match self {
            GlobalTermination::GapClosed => "gap_closed",
            GlobalTermination::NodeBudget => "node_budget",
            GlobalTermination::Degenerate => "degenerate",
            GlobalTermination::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeStatus {
    /// Bisected into two children.
    Branched,
    /// Dropped because its bound exceeded the incumbent.
    Pruned,
    /// `E ∩ Ω` certified empty.
    Empty,
    /// Could not be bisected further; closed at its bound.
    Degenerate,
    /// Still in the queue at termination.
    Open,
}

impl NodeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeStatus::Branched => "branched",
            NodeStatus::Pruned => "pruned",
            NodeStatus::Empty => "empty",
            NodeStatus::Degenerate => "degenerate",
            NodeStatus::Open => "open",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord<T> {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub lower_bound: T,
    /// `f(y)` at the bound minimizer.
    pub value_at_y: Option<T>,
    pub gap_bound: T,
    pub ambiguous: bool,
    pub status: NodeStatus,
    pub center: Option<Vec<T>>,
    pub shape: Option<SymMatrix<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSolveReport<T> {
    /// Incumbent; `None` only when the feasible set is empty.
    pub x: Option<Vec<T>>,
    pub upper_bound: T,
    pub lower_bound: T,
    pub ub_trace: Vec<T>,
    pub lb_trace: Vec<T>,
    /// Bounds after the root node and its local solve.
    pub root_lower: T,
    pub root_upper: T,
    pub sigma: T,
    pub bisections: usize,
    pub nodes: Vec<NodeRecord<T>>,
    pub seconds: f64,
    pub termination: GlobalTermination,
}

impl<T: Real> GlobalSolveReport<T> {
    pub fn pruned(&self) -> usize {
        self.nodes.iter().filter(|n| n.status == NodeStatus::Pruned).count()
    }
}

struct Open<T: Real> {
    id: usize,
    bound: T,
    depth: usize,
    ellipsoid: Ellipsoid<T>,
    y: Option<Vec<T>>,
    multipliers: Vec<T>,
}

// Min-heap on (bound, id).
impl<T: Real> Ord for Open<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl<T: Real> PartialOrd for Open<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> PartialEq for Open<T> {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl<T: Real> Eq for Open<T> {}

struct Search<'a, T: Real> {
    problem: &'a Qcqp<T>,
    opts: &'a EblOptions<T>,
    omega_point: Vec<T>,
    incumbent: Option<Vec<T>>,
    ub: T,
    nodes: Vec<NodeRecord<T>>,
}

impl<T: Real> Search<'_, T> {
    fn record(&mut self, e: &Ellipsoid<T>, parent: Option<usize>, depth: usize, b: &NodeBound<T>, bound: T) -> usize {
        let id = self.nodes.len();
        let (center, shape) = if self.opts.record_geometry {
            (Some(e.center().to_vec()), Some(e.shape().clone()))
        } else {
            (None, None)
        };
        self.nodes.push(NodeRecord {
            id,
            parent,
            depth,
            lower_bound: bound,
            value_at_y: b.y.as_ref().map(|y| self.problem.value(y)),
            gap_bound: b.gap_bound,
            ambiguous: b.ambiguous,
            status: if bound == T::infinity() { NodeStatus::Empty } else { NodeStatus::Open },
            center,
            shape,
        });
        id
    }

    fn offer(&mut self, x: &[T]) -> bool {
        let v = self.problem.value(x);
        if v < self.ub {
            self.ub = v;
            self.incumbent = Some(x.to_vec());
            true
        } else {
            false
        }
    }

    /// Updates the incumbent from a bound minimizer, polishing it with the
    /// local solver when it comes within `eps_abs` of the incumbent.
    fn refresh(&mut self, y: &[T]) {
        let fy = self.problem.value(y);
        let promising = fy < self.ub + self.opts.eps_abs;
        self.offer(y);
        if promising && self.opts.local_iter > 0 {
            let pg = PgOptions {
                max_iter: self.opts.local_iter,
                ..PgOptions::default()
            };
            if let Ok(r) = projected_gradient(self.problem, y, &pg) {
                self.offer(&r.x);
            }
        }
    }

    fn closed(&self, lb: T) -> bool {
        self.ub - lb <= self.opts.eps_abs.max(self.opts.eps_rel * lb.abs())
    }
}

/// Global minimization of `problem` by ellipsoidal branch and bound.
///
/// Stops when `UB − LB ≤ max{eps_abs, eps_rel·|LB|}`, after `node_budget`
/// bisections, or when every open node has become too thin to bisect.
pub fn ebl_solve<T: Real>(problem: &Qcqp<T>, opts: &EblOptions<T>) -> Result<GlobalSolveReport<T>> {
    let started = Instant::now();
    let dc = problem_sigma(problem);
    let done = |s: Search<'_, T>, lb: T, ub_trace, lb_trace, root: (T, T), bisections, termination| GlobalSolveReport {
        x: s.incumbent,
        upper_bound: s.ub,
        lower_bound: lb,
        ub_trace,
        lb_trace,
        root_lower: root.0,
        root_upper: root.1,
        sigma: dc.sigma,
        bisections,
        nodes: s.nodes,
        seconds: started.elapsed().as_secs_f64(),
        termination,
    };

    let omega_point = match find_feasible(problem.constraints())? {
        Feasibility::Feasible(x) => x,
        Feasibility::Infeasible { .. } => {
            let s = Search {
                problem,
                opts,
                omega_point: Vec::new(),
                incumbent: None,
                ub: T::infinity(),
                nodes: Vec::new(),
            };
            let inf = T::infinity();
            return Ok(done(s, inf, vec![], vec![], (inf, inf), 0, GlobalTermination::Infeasible));
        }
    };
    let mut s = Search {
        problem,
        opts,
        omega_point,
        incumbent: None,
        ub: T::infinity(),
        nodes: Vec::new(),
    };

    // Root: E₁ coincides with the first constraint, so it is not appended.
    let root_e = initial_ellipsoid(problem)?;
    let root = bound_node(&root_e, problem, dc, &s.omega_point.clone(), &[], &opts.baa, false)?;
    let root_id = s.record(&root_e, None, 0, &root, root.value);
    let y = root.y.clone().expect("root bound has a minimizer");
    s.offer(&y);
    if !s.closed(root.value) {
        s.refresh(&y);
    }
    let mut lb = root.value.min(s.ub);
    let root_bounds = (lb, s.ub);
    let mut ub_trace = vec![s.ub];
    let mut lb_trace = vec![lb];

    let mut heap = BinaryHeap::new();
    heap.push(Open {
        id: root_id,
        bound: root.value,
        depth: 0,
        ellipsoid: root_e,
        y: root.y,
        multipliers: root.multipliers,
    });
    // Smallest bound among nodes closed as degenerate; it still limits LB.
    let mut closed_floor = T::infinity();
    let mut bisections = 0;

    loop {
        while heap.peek().is_some_and(|n| n.bound > s.ub) {
            let n = heap.pop().expect("peeked");
            s.nodes[n.id].status = NodeStatus::Pruned;
        }
        let raw = heap.peek().map_or(T::infinity(), |n| n.bound).min(closed_floor);
        lb = lb.max(raw).min(s.ub);
        if s.closed(lb) {
            return Ok(done(s, lb, ub_trace, lb_trace, root_bounds, bisections, GlobalTermination::GapClosed));
        }
        let Some(node) = heap.pop() else {
            return Ok(done(s, lb, ub_trace, lb_trace, root_bounds, bisections, GlobalTermination::Degenerate));
        };
        if bisections >= opts.node_budget {
            heap.push(node);
            return Ok(done(s, lb, ub_trace, lb_trace, root_bounds, bisections, GlobalTermination::NodeBudget));
        }

        let split = branch_direction(&node.ellipsoid).and_then(|v| node.ellipsoid.bisect(&v));
        let Ok((plus, minus)) = split else {
            s.nodes[node.id].status = NodeStatus::Degenerate;
            closed_floor = closed_floor.min(node.bound);
            continue;
        };
        bisections += 1;
        s.nodes[node.id].status = NodeStatus::Branched;

        let start = node.y.clone().unwrap_or_else(|| s.omega_point.clone());
        let warm = &node.multipliers;
        let eval = |e: &Ellipsoid<T>| bound_node(e, problem, dc, &start, warm, &opts.baa, true);
        let (bp, bm) = if opts.parallel {
            std::thread::scope(|scope| {
                let h = scope.spawn(|| eval(&plus));
                let bm = eval(&minus);
                (h.join().expect("bound thread panicked"), bm)
            })
        } else {
            (eval(&plus), eval(&minus))
        };

        let ub_before = s.ub;
        for (e, b) in [(plus, bp), (minus, bm)] {
            // A failed bound solve keeps the child at its parent's bound.
            let b = b.unwrap_or_else(|_| NodeBound {
                value: node.bound,
                y: None,
                multipliers: Vec::new(),
                gap_bound: T::infinity(),
                ambiguous: true,
            });
            // The parent's bound is valid on the child's smaller region too.
            let bound = if b.value == T::infinity() { b.value } else { b.value.max(node.bound) };
            let id = s.record(&e, Some(node.id), node.depth + 1, &b, bound);
            if let Some(y) = &b.y {
                s.refresh(y);
            }
            if bound < T::infinity() {
                heap.push(Open {
                    id,
                    bound,
                    depth: node.depth + 1,
                    ellipsoid: e,
                    y: b.y,
                    multipliers: b.multipliers,
                });
            }
        }
        if ub_before - s.ub > opts.eps_abs {
            let kept: Vec<Open<T>> = heap.drain().collect();
            for n in kept {
                if n.bound > s.ub {
                    s.nodes[n.id].status = NodeStatus::Pruned;
                } else {
                    heap.push(n);
                }
            }
        }
        let raw = heap.peek().map_or(T::infinity(), |n| n.bound).min(closed_floor);
        lb = lb.max(raw).min(s.ub);
        ub_trace.push(s.ub);
        lb_trace.push(lb);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;
    use crate::Ellipsoid64;

    fn unit_ball(n: usize) -> QuadConstraint<f64> {
        QuadConstraint::new(SymMatrix::identity(n), vec![0.0; n], -1.0).unwrap()
    }

    fn neg_norm(n: usize) -> Qcqp<f64> {
        let f = Quadratic::new(SymMatrix::identity(n).scaled(-1.0), vec![0.0; n]).unwrap();
        Qcqp::new(f, vec![unit_ball(n)]).unwrap()
    }

    #[test]
    fn sigma_rule() {
        let s = |d: &[f64]| -> f64 { dc_sigma(&sym_eig(&SymMatrix::diagonal(d)).unwrap()).sigma };
        assert!((s(&[1.0, -3.0]) - 3.1).abs() < 1e-12);
        assert_eq!(s(&[1.0, 1.0]), 0.0);
        assert!((s(&[0.05, 0.05]) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn direction_of_elongated_ellipse() {
        let e: Ellipsoid64 = Ellipsoid::from_quadratic(SymMatrix::diagonal(&[1.0, 4.0]), vec![0.0; 2], 1.0).unwrap();
        let v = branch_direction(&e).unwrap();
        assert!((v[0].abs() - 1.0).abs() < 1e-10 && v[1].abs() < 1e-10, "{v:?}");
    }

    #[test]
    fn bound_on_unit_ball() {
        let q = neg_norm(2);
        let dc = problem_sigma(&q);
        assert!((dc.sigma - 1.1).abs() < 1e-12);
        let e = initial_ellipsoid(&q).unwrap();
        let b = lower_bound(&e, &q, dc, &[0.0, 0.0], &[], &BaaOptions::default()).unwrap();
        assert!((b.value + 1.1).abs() < 1e-8, "{b:?}");
        let y = b.y.unwrap();
        assert!(linalg::norm(&y) < 1e-6);
        assert!(q.value(&y) - b.value <= b.gap_bound + 1e-6);
    }

    #[test]
    fn maximizes_norm_over_ball() {
        let q = neg_norm(2);
        let r = ebl_solve(&q, &EblOptions::default()).unwrap();
        assert_eq!(r.termination, GlobalTermination::GapClosed);
        // Within the stopping rule of the true value −1.
        assert!((r.upper_bound + 1.0).abs() <= 1e-2, "{}", r.upper_bound);
        // Node bounds are f_L at an approximate minimizer, accurate to the BAA tolerance.
        assert!(r.lower_bound <= -1.0 + 1e-4, "{} {:?}", r.lower_bound, r.lb_trace);
        assert!(r.ub_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.lb_trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.ub_trace.iter().zip(&r.lb_trace).all(|(u, l)| u >= l));
    }

    #[test]
    fn zero_budget_reports_root_bounds() {
        let q = neg_norm(2);
        let opts = EblOptions {
            node_budget: 0,
            ..EblOptions::default()
        };
        let r = ebl_solve(&q, &opts).unwrap();
        assert_eq!(r.termination, GlobalTermination::NodeBudget);
        assert_eq!(r.bisections, 0);
        assert_eq!(r.lower_bound, r.root_lower);
    }

    #[test]
    fn convex_problem_needs_no_bisection() {
        let f = Quadratic::new(SymMatrix::identity(2), vec![-6.0, 0.0]).unwrap();
        let q = Qcqp::new(f, vec![unit_ball(2)]).unwrap();
        let r = ebl_solve(&q, &EblOptions::default()).unwrap();
        assert_eq!(r.bisections, 0);
        assert_eq!(r.termination, GlobalTermination::GapClosed);
        // min of ‖x‖² − 6x₁ over the unit disk is at (1, 0).
        assert!((r.upper_bound + 5.0).abs() < 1e-4, "{}", r.upper_bound);
    }

    #[test]
    fn empty_feasible_set() {
        let f = Quadratic::new(SymMatrix::identity(1), vec![0.0]).unwrap();
        let far = QuadConstraint::new(SymMatrix::identity(1), vec![-10.0], 24.0).unwrap();
        let q = Qcqp::new(f, vec![unit_ball(1), far]).unwrap();
        let r = ebl_solve(&q, &EblOptions::default()).unwrap();
        assert_eq!(r.termination, GlobalTermination::Infeasible);
        assert!(r.x.is_none());
    }
}
