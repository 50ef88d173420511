//! Experiment orchestrator: per trial, draw data from the problem law, split
//! 60/20/20, fit `f̂` on the learning split, calibrate on validation, then
//! solve and score every test covariate.
//!
//! Streams: trial `i` uses `StreamKey(seed, "bench").index(i)` with labels
//! `data`, `split`, `predictor`, `test-extra`, and per test point `var` and
//! `cvar`. Work items are mapped in index order and reduced sequentially, so
//! reports do not depend on the thread count.

use std::sync::Arc;

use rand::seq::SliceRandom;

use super::baselines::{baseline_ellipsoid, baseline_knn, default_knn_k};
use super::config::{ExperimentConfig, Method};
use super::metrics::{sample_costs, var_from_samples};
use super::report::{ExperimentReport, MethodFailure, ReportRow};
use crate::calibrate::{
    buq_fit, euq_fit, individual_fit_residuals, residuals, sample_conditional_residuals, BoxCalibration, Calibration,
    EllipsoidCalibration,
};
use crate::dro::dro_ball;
use crate::error::{PtcError, Result};
use crate::frank_wolfe::FwOptions;
use crate::linalg::{dot, Matrix};
use crate::par::{map_indices, Execution};
use crate::predictors::{fit_predictor, Dataset, Predictor};
use crate::problems::{gen_knapsack, gen_shortest_path, gen_toy, ProblemInstance, ProblemKind};
use crate::rng::StreamKey;
use crate::robust::{solve_cvar_lp, solve_robust_with, Constraints, RobustProblem, RobustSolution};
use crate::uncertainty::UncertaintySet;

/// Conditional-gradient settings used for every robust solve in a run.
pub const BENCH_FW: FwOptions = FwOptions {
    gap_tol: 1e-6,
    max_iter: 5000,
    relative_gap: true,
};

/// Robust solve that accepts the best iterate when the gap target is missed.
pub fn solve_set(set: &UncertaintySet, cons: &Constraints) -> Result<RobustSolution> {
    match solve_robust_with(&RobustProblem::new(set.clone(), cons.clone())?, &BENCH_FW) {
        Err(PtcError::NotConverged { best, .. }) => {
            let x = cons.decision(&best.x)?;
            Ok(RobustSolution {
                worst_case_value: set.support(&x)?,
                x,
                x_lp: best.x,
                status: best.status,
            })
        }
        other => other,
    }
}

/// Base instance (Θ and constraint sets) for a configuration.
pub fn base_instance(cfg: &ExperimentConfig) -> Result<ProblemInstance> {
    match cfg.problem {
        ProblemKind::Toy => gen_toy(1, cfg.d, cfg.seed),
        ProblemKind::ShortestPath => gen_shortest_path(1, cfg.d, cfg.seed),
        ProblemKind::Knapsack => gen_knapsack(1, cfg.d, cfg.n, cfg.seed),
    }
}

type Pred = Arc<Predictor>;

/// Per-trial fitted state of one method.
enum Fitted {
    Box(Vec<BoxCalibration<Pred>>),
    Ellipsoid(Vec<EllipsoidCalibration<Pred>>),
    /// Context-free sets with their solutions per constraint set.
    Constant(Vec<(UncertaintySet, Vec<Result<RobustSolution>>)>),
    Knn { k: usize },
    Kernel { predictor: Pred, bandwidth: f64 },
}

struct Trial<'a> {
    cfg: &'a ExperimentConfig,
    law: &'a crate::problems::CostLaw,
    constraints: &'a [Constraints],
    key: StreamKey,
    train: Dataset,
    val: Dataset,
    val_residuals: Option<Matrix>,
    test: Dataset,
    fitted: Vec<Result<Fitted>>,
}

/// Sums over one test covariate (and every constraint set) for one cell.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    var: f64,
    opt: f64,
    cov: f64,
    count: usize,
}

impl Sums {
    fn add(&mut self, o: Sums) {
        self.var += o.var;
        self.opt += o.opt;
        self.cov += o.cov;
        self.count += o.count;
    }
}

/// Cell outcome of one trial: per-point means, or the first error.
struct CellTrial {
    means: Option<(f64, f64, f64)>,
    failed_points: usize,
    error: Option<String>,
}

fn split_trial(cfg: &ExperimentConfig, data: &Dataset, key: StreamKey) -> (Dataset, Dataset, Dataset) {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut key.label("split").rng());
    let (learn, val, _) = cfg.split_sizes();
    (
        data.select(&idx[..learn]),
        data.select(&idx[learn..learn + val]),
        data.select(&idx[learn + val..]),
    )
}

fn stack(a: &Dataset, b: &Dataset) -> Dataset {
    let cat = |x: &Matrix, y: &Matrix| {
        let mut v = x.as_slice().to_vec();
        v.extend_from_slice(y.as_slice());
        Matrix::from_vec(x.rows() + y.rows(), x.cols(), v).expect("same width")
    };
    Dataset {
        z: cat(&a.z, &b.z),
        c: cat(&a.c, &b.c),
    }
}

impl<'a> Trial<'a> {
    fn new(cfg: &'a ExperimentConfig, inst: &'a ProblemInstance, trial: usize) -> Trial<'a> {
        let key = StreamKey::new(cfg.seed, "bench").index(trial as u64);
        let data = inst.resample(cfg.t, key.label("data"));
        let (learn, val, mut test) = split_trial(cfg, &data, key);
        let want = cfg.test_points();
        if test.len() < want {
            test = stack(&test, &inst.resample(want - test.len(), key.label("test-extra")));
        } else {
            test = test.select(&(0..want).collect::<Vec<_>>());
        }
        let predictor = fit_predictor(&learn, &cfg.predictor, key.label("predictor").raw()).map(Arc::new);
        let val_residuals = predictor.as_ref().ok().and_then(|p| residuals(p, &val.z, &val.c).ok());
        let mut t = Trial {
            cfg,
            law: &inst.law,
            constraints: &inst.constraints[..cfg.constraint_sets()],
            key,
            train: stack(&learn, &val),
            val,
            val_residuals,
            test,
            fitted: Vec::new(),
        };
        t.fitted = cfg.methods.iter().map(|m| t.fit(*m, &predictor)).collect();
        t
    }

    fn fit(&self, method: Method, predictor: &Result<Pred>) -> Result<Fitted> {
        let cfg = self.cfg;
        let pred = || predictor.clone();
        let seed = self.key.label(method.name()).raw();
        Ok(match method {
            Method::PtcB => {
                let base = buq_fit(
                    pred()?,
                    &self.val.z,
                    &self.val.c,
                    cfg.quantile_level,
                    cfg.calibration_split,
                    &cfg.quantile,
                    seed,
                )?;
                Fitted::Box(cfg.alphas.iter().map(|a| base.with_alpha(*a)).collect::<Result<_>>()?)
            }
            Method::PtcE => {
                let base = euq_fit(
                    pred()?,
                    &self.val.z,
                    &self.val.c,
                    cfg.quantile_level,
                    cfg.calibration_split,
                    &cfg.quantile,
                    seed,
                )?;
                Fitted::Ellipsoid(cfg.alphas.iter().map(|a| base.with_alpha(*a)).collect::<Result<_>>()?)
            }
            Method::Ellipsoid => Fitted::Constant(
                cfg.alphas
                    .iter()
                    .map(|a| {
                        let set = baseline_ellipsoid(&self.train.c, *a)?;
                        let sols = self.constraints.iter().map(|c| solve_set(&set, c)).collect();
                        Ok((set, sols))
                    })
                    .collect::<Result<_>>()?,
            ),
            Method::Knn => {
                let k = default_knn_k(self.train.len(), self.law.cost_dim());
                if self.train.len() < k {
                    return Err(PtcError::TooFewSamples {
                        needed: k,
                        have: self.train.len(),
                    });
                }
                Fitted::Knn { k }
            }
            Method::Dro | Method::Individual | Method::Cvar => {
                let p = pred()?;
                if self.val_residuals.is_none() {
                    return Err(PtcError::NumericalBreakdown("validation residuals unavailable".into()));
                }
                Fitted::Kernel {
                    predictor: p,
                    bandwidth: cfg.dro.bandwidth_for(self.val.len(), self.val.z.cols()),
                }
            }
        })
    }

    /// Set and per-constraint-set decisions for one (method, α) at `z`.
    /// Returns `(set, [(x, opt, threshold)])`; `threshold` is the CVaR γ.
    #[allow(clippy::type_complexity)]
    fn decide(
        &self,
        method: Method,
        fitted: &Fitted,
        ai: usize,
        point: usize,
        z: &[f64],
    ) -> Result<(Option<UncertaintySet>, Vec<(Vec<f64>, f64, Option<f64>)>)> {
        let robust = |set: UncertaintySet| -> Result<_> {
            let sols = self
                .constraints
                .iter()
                .map(|c| solve_set(&set, c).map(|s| (s.x, s.worst_case_value, None)))
                .collect::<Result<Vec<_>>>()?;
            Ok((Some(set), sols))
        };
        let resid = || self.val_residuals.as_ref().expect("checked at fit time");
        match (method, fitted) {
            (_, Fitted::Box(cals)) => robust(cals[ai].set_at(z)?),
            (_, Fitted::Ellipsoid(cals)) => robust(cals[ai].set_at(z)?),
            (_, Fitted::Constant(list)) => {
                let (set, sols) = &list[ai];
                let out = sols
                    .iter()
                    .map(|s| s.clone().map(|s| (s.x, s.worst_case_value, None)))
                    .collect::<Result<Vec<_>>>()?;
                Ok((Some(set.clone()), out))
            }
            (_, Fitted::Knn { k }) => robust(baseline_knn(&self.train.z, &self.train.c, z, *k)?),
            (Method::Dro, Fitted::Kernel { predictor, .. }) => {
                let ball = dro_ball(predictor, &self.val.z, resid(), z, &self.cfg.dro, &self.cfg.kernel)?;
                robust(UncertaintySet::new_norm_ball(ball.center, ball.epsilon)?)
            }
            (Method::Individual, Fitted::Kernel { predictor, bandwidth }) => robust(individual_fit_residuals(
                predictor,
                &self.val.z,
                resid(),
                self.cfg.alphas[ai],
                &self.cfg.kernel,
                *bandwidth,
                z,
            )?),
            (_, Fitted::Kernel { predictor, bandwidth }) => {
                let draws = sample_conditional_residuals(
                    predictor,
                    &self.val.z,
                    resid(),
                    &self.cfg.kernel,
                    *bandwidth,
                    z,
                    self.cfg.cvar_samples,
                    self.key.label("cvar").index(point as u64).raw(),
                )?;
                let sols = self
                    .constraints
                    .iter()
                    .map(|c| solve_cvar_lp(&draws, self.cfg.alphas[ai], c).map(|s| (s.x, s.value, Some(s.gamma))))
                    .collect::<Result<Vec<_>>>()?;
                Ok((None, sols))
            }
        }
    }

    /// All cells at test point `i`, ordered method-major then α.
    fn eval_point(&self, i: usize) -> Vec<Result<Sums>> {
        let z = self.test.z.row(i);
        let c_real = self.test.c.row(i);
        let samples = sample_costs(self.law, z, self.cfg.var_samples, self.key.label("var").index(i as u64));
        let n_alpha = self.cfg.alphas.len();
        let mut out = Vec::with_capacity(self.cfg.methods.len() * n_alpha);
        for (method, fitted) in self.cfg.methods.iter().zip(&self.fitted) {
            let fitted = match fitted {
                Ok(f) => f,
                Err(e) => {
                    out.extend((0..n_alpha).map(|_| Err(e.clone())));
                    continue;
                }
            };
            // kNN and DRO sets do not depend on α.
            let shared = matches!(method, Method::Knn | Method::Dro);
            let mut first = None;
            for (ai, alpha) in self.cfg.alphas.iter().enumerate() {
                let decided = if shared {
                    first.get_or_insert_with(|| self.decide(*method, fitted, 0, i, z)).clone()
                } else {
                    self.decide(*method, fitted, ai, i, z)
                };
                out.push(decided.and_then(|(set, sols)| {
                    let covered = match &set {
                        Some(s) => Some(s.contains(c_real)? as u8 as f64),
                        None => None,
                    };
                    let mut sums = Sums::default();
                    for (x, opt, gamma) in sols {
                        let cov = match (covered, gamma) {
                            (Some(c), _) => c,
                            (None, Some(g)) => (dot(c_real, &x) <= g) as u8 as f64,
                            (None, None) => 0.0,
                        };
                        sums.add(Sums {
                            var: var_from_samples(&x, &samples, *alpha)?,
                            opt,
                            cov,
                            count: 1,
                        });
                    }
                    Ok(sums)
                }));
            }
        }
        out
    }

    fn run(&self, exec: Execution) -> Vec<CellTrial> {
        let per_point = map_indices(self.test.len(), exec, |i| self.eval_point(i));
        let cells = self.cfg.methods.len() * self.cfg.alphas.len();
        (0..cells)
            .map(|cell| {
                let mut total = Sums::default();
                let mut failed = 0;
                let mut error = None;
                for p in &per_point {
                    match &p[cell] {
                        Ok(s) => total.add(*s),
                        Err(e) => {
                            failed += 1;
                            error.get_or_insert_with(|| e.to_string());
                        }
                    }
                }
                let means = (total.count > 0).then(|| {
                    let n = total.count as f64;
                    (total.var / n, total.opt / n, total.cov / n)
                });
                CellTrial {
                    means,
                    failed_points: failed,
                    error,
                }
            })
            .collect()
    }
}

/// Run every trial and aggregate one row per `(α, method)`.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentReport> {
    cfg.validate()?;
    let inst = base_instance(cfg)?;
    let trials = map_indices(cfg.trials, exec, |t| Trial::new(cfg, &inst, t).run(exec));
    let n_alpha = cfg.alphas.len();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (ai, alpha) in cfg.alphas.iter().enumerate() {
        for (mi, method) in cfg.methods.iter().enumerate() {
            let cell = mi * n_alpha + ai;
            let (mut var, mut opt, mut cov, mut ok) = (0.0, 0.0, 0.0, 0usize);
            let mut failed_trials = 0;
            let mut failed_points = 0;
            let mut first_error = None;
            for t in &trials {
                let c = &t[cell];
                failed_points += c.failed_points;
                if first_error.is_none() {
                    first_error = c.error.clone();
                }
                match c.means {
                    Some((v, o, k)) => {
                        var += v;
                        opt += o;
                        cov += k;
                        ok += 1;
                    }
                    None => failed_trials += 1,
                }
            }
            let n = ok as f64;
            rows.push(ReportRow {
                alpha: *alpha,
                method: *method,
                avg_var: if ok > 0 { var / n } else { f64::NAN },
                avg_opt: if ok > 0 { opt / n } else { f64::NAN },
                avg_coverage: if ok > 0 { cov / n } else { f64::NAN },
                trials: ok,
                seed: cfg.seed,
            });
            if failed_points > 0 {
                failures.push(MethodFailure {
                    alpha: *alpha,
                    method: *method,
                    failed_trials,
                    failed_points,
                    first_error,
                });
            }
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        rows,
        failures,
    })
}
