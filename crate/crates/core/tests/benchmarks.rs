//! End-to-end benchmark invariants on small runs.

use ptc_core::bench::{
    estimate_var, parse_report_csv, render_table, run_experiment, ExperimentConfig, Method, CSV_HEADER,
};
use ptc_core::par::Execution;
use ptc_core::problems::{gen_shortest_path, ProblemKind};
use ptc_core::rng::StreamKey;

fn small(problem: ProblemKind, methods: Vec<Method>, alphas: Vec<f64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(problem, methods, alphas, 300);
    cfg.d = 5;
    cfg.trials = 3;
    cfg.test_points = Some(30);
    cfg.var_samples = 200;
    cfg.cvar_samples = 20;
    cfg
}

#[test]
fn nested_methods_have_monotone_opt() {
    let alphas = vec![0.6, 0.7, 0.8, 0.9];
    let cfg = small(ProblemKind::ShortestPath, vec![Method::PtcB, Method::PtcE], alphas.clone());
    let report = run_experiment(&cfg, Execution::Parallel).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    for m in [Method::PtcB, Method::PtcE] {
        let opts: Vec<f64> = alphas.iter().map(|a| report.row(*a, m).unwrap().avg_opt).collect();
        assert!(opts.windows(2).all(|w| w[0] <= w[1] + 1e-9), "{m}: {opts:?}");
        let covs: Vec<f64> = alphas.iter().map(|a| report.row(*a, m).unwrap().avg_coverage).collect();
        assert!(covs.windows(2).all(|w| w[0] <= w[1]), "{m} coverage: {covs:?}");
    }
}

#[test]
fn knn_coverage_ignores_alpha() {
    let alphas = vec![0.6, 0.75, 0.9];
    let cfg = small(ProblemKind::ShortestPath, vec![Method::Knn], alphas.clone());
    let report = run_experiment(&cfg, Execution::Parallel).unwrap();
    let covs: Vec<f64> = alphas.iter().map(|a| report.row(*a, Method::Knn).unwrap().avg_coverage).collect();
    let range = covs.iter().cloned().fold(f64::MIN, f64::max) - covs.iter().cloned().fold(f64::MAX, f64::min);
    assert!(range < 0.05, "{covs:?}");
}

#[test]
fn estimated_var_is_monotone_in_alpha() {
    let inst = gen_shortest_path(1, 5, 3).unwrap();
    let z = inst.dataset.z.row(0).to_vec();
    let x = vec![0.5; inst.n()];
    let key = StreamKey::new(3, "var");
    let vars: Vec<f64> = [0.5, 0.7, 0.9, 0.99]
        .iter()
        .map(|a| estimate_var(&x, &z, &inst.law, *a, 500, key).unwrap())
        .collect();
    assert!(vars.windows(2).all(|w| w[0] <= w[1]), "{vars:?}");
}

#[test]
fn every_method_reports_on_toy() {
    let cfg = small(ProblemKind::Toy, Method::ALL.to_vec(), vec![0.8]);
    let report = run_experiment(&cfg, Execution::Sequential).unwrap();
    assert_eq!(report.rows.len(), Method::ALL.len());
    for row in &report.rows {
        assert_eq!(row.trials, cfg.trials, "{}", row.method);
        assert!(row.avg_var.is_finite() && row.avg_opt.is_finite());
        assert!((0.0..=1.0).contains(&row.avg_coverage));
    }
    let csv = report.to_csv();
    assert!(csv.starts_with(&CSV_HEADER.join(",")));
    assert_eq!(parse_report_csv(&csv).unwrap().len(), Method::ALL.len());
    let table = render_table(&csv).unwrap();
    assert!(table.contains("ptc-b") && table.contains("cvar"));
}

#[test]
fn knapsack_runs_with_fewer_sets() {
    let mut cfg = small(ProblemKind::Knapsack, vec![Method::PtcB, Method::Ellipsoid], vec![0.8]);
    cfg.n = 6;
    cfg.constraint_sets = Some(2);
    cfg.test_points = Some(10);
    let report = run_experiment(&cfg, Execution::Parallel).unwrap();
    let b = report.row(0.8, Method::PtcB).unwrap();
    assert!(b.avg_var <= 0.0, "a feasible knapsack decision never has positive cost, got {}", b.avg_var);
}
