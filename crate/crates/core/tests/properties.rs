//! Property tests for solver, set, calibration and metric invariants.

use proptest::prelude::*;

use ptc_core::bench::{var_of_costs, var_rank};
use ptc_core::calibrate::{conformal_eta, conformal_rank, BoxCalibration, Calibration};
use ptc_core::dro::{default_bandwidth, kernel_weights, KernelSpec};
use ptc_core::linalg::Matrix;
use ptc_core::predictors::{FnModel, QuantileModel};
use ptc_core::problems::oracles::{oracle_prob_zero, regularized_lower_gamma};
use ptc_core::robust::{check_guarantee, solve_robust, Constraints, RobustProblem};
use ptc_core::simplex::{solve_lp_simplex, LpProblem, LpStatus};
use ptc_core::uncertainty::UncertaintySet;

fn alpha() -> impl Strategy<Value = f64> {
    0.01f64..0.99
}

/// Feasible bounded standard-form LP `(c, A, b, x₀)` with `A x₀ = b`.
fn bounded_lp() -> impl Strategy<Value = (Vec<f64>, Matrix, Vec<f64>, Vec<f64>)> {
    (2usize..6, 0usize..3).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n * m),
            prop::collection::vec(0.0f64..1.0, n),
        )
            .prop_map(move |(c, a_rand, x0)| {
                let mut rows: Vec<Vec<f64>> = a_rand.chunks(n).map(|r| r.to_vec()).collect();
                rows.push(vec![1.0; n]);
                let a = Matrix::from_rows(&rows).unwrap();
                let b = a.matvec(&x0);
                (c, a, b, x0)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conformal_eta_is_monotone_and_covers(
        scores in prop::collection::vec(0.0f64..10.0, 1..40),
        a1 in alpha(),
        a2 in alpha(),
    ) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let e_lo = conformal_eta(&scores, lo).unwrap();
        let e_hi = conformal_eta(&scores, hi).unwrap();
        prop_assert!(e_lo <= e_hi);
        prop_assert!(scores.contains(&e_hi));
        let k = conformal_rank(scores.len(), hi);
        prop_assert!(scores.iter().filter(|s| **s <= e_hi).count() >= k);
    }

    #[test]
    fn var_is_monotone_in_alpha(mut costs in prop::collection::vec(-100.0f64..100.0, 1..60), a1 in alpha(), a2 in alpha()) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let v_lo = var_of_costs(&mut costs, lo).unwrap();
        let v_hi = var_of_costs(&mut costs, hi).unwrap();
        prop_assert!(v_lo <= v_hi);
        let below = costs.iter().filter(|c| **c <= v_hi).count();
        prop_assert!(below >= var_rank(costs.len(), hi));
    }

    #[test]
    fn box_support_is_corner_sum(
        bounds in prop::collection::vec((-5.0f64..5.0, 0.0f64..3.0), 1..6),
        xs in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let lower: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let upper: Vec<f64> = bounds.iter().map(|b| b.0 + b.1).collect();
        let x = &xs[..lower.len()];
        let set = UncertaintySet::new_box(lower.clone(), upper.clone()).unwrap();
        let closed: f64 = x.iter().zip(lower.iter().zip(&upper)).map(|(xi, (l, u))| (l * xi).max(u * xi)).sum();
        prop_assert!((set.support(x).unwrap() - closed).abs() <= 1e-9);
        prop_assert!(set.contains(&set.center()).unwrap());
    }

    #[test]
    fn norm_ball_support_closed_form(
        center in prop::collection::vec(-3.0f64..3.0, 3),
        x in prop::collection::vec(-2.0f64..2.0, 3),
        r in 0.0f64..4.0,
    ) {
        let set = UncertaintySet::new_norm_ball(center.clone(), r).unwrap();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let closed = center.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>() + r * norm;
        prop_assert!((set.support(&x).unwrap() - closed).abs() <= 1e-9);
    }

    #[test]
    fn simplex_is_feasible_and_no_worse_than_a_feasible_point((c, a, b, x0) in bounded_lp()) {
        let sol = solve_lp_simplex(&LpProblem::new(c.clone(), a.clone(), b.clone()).unwrap()).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!(sol.x.iter().all(|v| *v >= -1e-9));
        let ax = a.matvec(&sol.x);
        prop_assert!(ax.iter().zip(&b).all(|(l, r)| (l - r).abs() <= 1e-8));
        let at_x0: f64 = c.iter().zip(&x0).map(|(ci, xi)| ci * xi).sum();
        prop_assert!(sol.value <= at_x0 + 1e-9);
    }

    #[test]
    fn robust_box_solution_bounds_every_cost_in_the_set(
        (_, a, b, _) in bounded_lp(),
        seeds in prop::collection::vec((-2.0f64..1.0, 0.0f64..2.0, 0.0f64..1.0), 6),
    ) {
        let n = a.cols();
        let lower: Vec<f64> = seeds[..n].iter().map(|s| s.0).collect();
        let upper: Vec<f64> = seeds[..n].iter().map(|s| s.0 + s.1).collect();
        let inside: Vec<f64> = seeds[..n].iter().map(|s| s.0 + s.1 * s.2).collect();
        let set = UncertaintySet::new_box(lower, upper).unwrap();
        let cons = Constraints::standard(a, b).unwrap();
        let sol = solve_robust(&RobustProblem::new(set.clone(), cons).unwrap()).unwrap();
        let g = check_guarantee(&sol, &set, &inside);
        prop_assert!(g.covered && g.cost_ok);
    }

    #[test]
    fn kernel_weights_partition(
        zs in prop::collection::vec(-1.0f64..1.0, 5..40),
        z0 in -0.5f64..0.5,
        h in 0.2f64..2.0,
    ) {
        let z = Matrix::from_vec(zs.len(), 1, zs).unwrap();
        if let Ok(w) = kernel_weights(&z, &[z0], &KernelSpec::default(), h) {
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(w.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn bandwidth_rule_monotone(t in 2usize..100_000, d in 1usize..10) {
        prop_assert!(default_bandwidth(t + 1, d, 1.0) < default_bandwidth(t, d, 1.0));
        prop_assert!(default_bandwidth(t, d + 1, 1.0) > default_bandwidth(t, d, 1.0));
    }

    #[test]
    fn incomplete_gamma_matches_statrs(a in 0.5f64..20.0, x in 0.0f64..60.0) {
        let ours = regularized_lower_gamma(a, x);
        let reference = statrs::function::gamma::gamma_lr(a, x);
        prop_assert!((ours - reference).abs() <= 1e-9, "a={} x={} ours={} statrs={}", a, x, ours, reference);
    }

    #[test]
    fn prob_zero_is_a_probability(d in 1usize..12, k_frac in 0.0f64..1.0, a in 0.51f64..0.99) {
        let k = 1 + ((d - 1) as f64 * k_frac) as usize;
        let p = oracle_prob_zero(k, d, a).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn calibrated_boxes_are_nested_in_alpha(
        rows in prop::collection::vec((-1.0f64..1.0, -3.0f64..3.0), 8..40),
        a1 in alpha(),
        a2 in alpha(),
    ) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let z = Matrix::from_vec(rows.len(), 1, rows.iter().map(|r| r.0).collect()).unwrap();
        let c = Matrix::from_vec(rows.len(), 1, rows.iter().map(|r| r.1).collect()).unwrap();
        let f = FnModel::new(1, 1, |z: &[f64]| vec![z[0]]);
        let h = QuantileModel::constant(1, vec![1.0], 0.8, 1e-6).unwrap();
        let base = BoxCalibration::calibrate(f, h, &z, &c, lo).unwrap();
        let wider = base.with_alpha(hi).unwrap();
        prop_assert!(base.eta() <= wider.eta());
        let (s_lo, s_hi) = (base.set_at(&[0.3]).unwrap(), wider.set_at(&[0.3]).unwrap());
        prop_assert!(s_lo.support(&[1.0]).unwrap() <= s_hi.support(&[1.0]).unwrap());
        prop_assert!(s_lo.support(&[-1.0]).unwrap() <= s_hi.support(&[-1.0]).unwrap());
    }
}
