#![allow(clippy::needless_range_loop)]

use ebl_core::convex::{ball_maps, baa_solve, is_feasible, kkt_error, project_onto_balls, Ball, BallMapParams, Termination};
use ebl_core::linalg::{dot, norm};
use ebl_core::local::{projected_gradient, PgOptions};
use ebl_core::phase1::{find_feasible, Feasibility};
use ebl_core::probgen::generate;
use ebl_core::{BaaOptions, Convexity, GenSpec, Qcqp, Rand};
use proptest::prelude::*;

fn start(p: &Qcqp<f64>) -> Vec<f64> {
    match find_feasible(p.constraints()).unwrap() {
        Feasibility::Feasible(x) => x,
        other => panic!("generated instance not feasible: {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn baa_descends_and_stays_feasible(n in 2usize..=15, m in 1usize..=5, seed in any::<u64>(), psd in any::<bool>()) {
        let kind = if psd { Convexity::Psd } else { Convexity::Convex };
        let inst = generate::<f64>(&GenSpec::new(kind, n, m, seed)).unwrap();
        let convex = inst.problem.as_convex().unwrap();
        let x0 = start(&inst.problem);
        let r = baa_solve(&convex, &x0, &BaaOptions::default()).unwrap();
        prop_assert!(r.trace.windows(2).all(|w| w[1].objective <= w[0].objective));
        prop_assert!(r.objective <= inst.problem.value(&x0));
        prop_assert!(is_feasible(convex.constraints(), &r.x));
        prop_assert!(r.multipliers.iter().all(|&l| l >= 0.0));
        if r.termination == Termination::Converged {
            prop_assert!(kkt_error(&convex, &r.x, &r.multipliers) <= 1e-4);
        }
    }

    #[test]
    fn ball_maps_interior_and_boundary(n in 1usize..=8, seed in any::<u64>(), alpha in 0.1f64..1.0, beta in 0.1f64..3.0) {
        let inst = generate::<f64>(&GenSpec::new(Convexity::Convex, n, 1, seed)).unwrap();
        let g = &inst.problem.constraints()[0];
        let params = BallMapParams::new(alpha, beta).unwrap();
        // Interior: the planted point has g < 0.
        let p = &inst.planted;
        let ball = ball_maps(g, p, &params).unwrap();
        prop_assert!(ball.radius >= 0.0);
        prop_assert!(ball.excess(p) < 0.0);
        // Boundary: move from p along a direction to g = 0.
        let dir: Vec<f64> = Rand::new(seed ^ 9).vector(n, -1.0, 1.0);
        let (qa, qb, qc) = (g.a.quad_form(&dir), dot(&g.gradient(p), &dir), g.value(p));
        let t = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
        let xb: Vec<f64> = p.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
        let on = ball_maps(g, &xb, &params).unwrap();
        prop_assert!(on.excess(&xb).abs() <= 1e-6 * (1.0 + on.radius * on.radius));
        // Continuity: a tiny move changes the ball by a tiny amount.
        let near: Vec<f64> = p.iter().zip(&dir).map(|(a, d)| a + 1e-7 * t * d).collect();
        let b2 = ball_maps(g, &near, &params).unwrap();
        let dc: Vec<f64> = b2.center.iter().zip(&ball.center).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&dc) + (b2.radius - ball.radius).abs() <= 1e-3 * (1.0 + ball.radius));
    }

    #[test]
    fn projection_dual_matches_closed_form(n in 1usize..=8, k in 1usize..=4, seed in any::<u64>()) {
        let mut rng = Rand::new(seed);
        let common: Vec<f64> = rng.vector(n, -2.0, 2.0);
        let balls: Vec<Ball<f64>> = (0..k)
            .map(|_| {
                let center: Vec<f64> = rng.vector(n, -2.0, 2.0);
                let d: Vec<f64> = center.iter().zip(&common).map(|(a, b)| a - b).collect();
                Ball { center, radius: norm(&d) + rng.uniform(0.1, 1.0) }
            })
            .collect();
        let target: Vec<f64> = rng.vector(n, -10.0, 10.0);
        let s = project_onto_balls(&target, &balls, &[]).unwrap();
        let total: f64 = 1.0 + s.multipliers.iter().sum::<f64>();
        for i in 0..n {
            let num = target[i] + balls.iter().zip(&s.multipliers).map(|(b, l)| l * b.center[i]).sum::<f64>();
            prop_assert!((s.x[i] - num / total).abs() <= 1e-10 * (1.0 + s.x[i].abs()));
        }
        for b in &balls {
            prop_assert!(b.excess(&s.x) <= 1e-6 * (1.0 + b.radius * b.radius));
        }
    }

    #[test]
    fn projected_gradient_agrees_with_baa(n in 2usize..=6, m in 1usize..=3, seed in any::<u64>()) {
        let inst = generate::<f64>(&GenSpec::new(Convexity::Convex, n, m, seed)).unwrap();
        let x0 = start(&inst.problem);
        let baa = baa_solve(&inst.problem.as_convex().unwrap(), &x0, &BaaOptions::default()).unwrap();
        let pg = projected_gradient(&inst.problem, &x0, &PgOptions { tol: 1e-6, max_iter: 5000, ..PgOptions::default() }).unwrap();
        prop_assert!(pg.objective <= inst.problem.value(&x0));
        prop_assert!(is_feasible(inst.problem.constraints(), &pg.x));
        let scale = baa.objective.abs().max(1.0);
        prop_assert!((pg.objective - baa.objective).abs() <= 1e-3 * scale, "pg {} baa {}", pg.objective, baa.objective);
    }
}

#[test]
fn single_precision_solve() {
    let inst = generate::<f32>(&GenSpec::new(Convexity::Convex, 4, 2, 11)).unwrap();
    let x0 = inst.planted.clone();
    let opts = BaaOptions { tol_kkt: 1e-2f32, ..BaaOptions::default() };
    let r = baa_solve(&inst.problem.as_convex().unwrap(), &x0, &opts).unwrap();
    assert!(r.objective <= inst.problem.value(&x0));
    assert!(r.trace.windows(2).all(|w| w[1].objective <= w[0].objective));
}
