use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dro::{DroConfig, KernelSpec};
use crate::error::{PtcError, Result};
use crate::predictors::{PredictorConfig, QuantileConfig};
use crate::problems::{ProblemKind, KNAPSACK_SETS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Conformal box sets around the point prediction.
    PtcB,
    /// Conformal ellipsoids around the point prediction.
    PtcE,
    /// Context-free Gaussian ellipsoid.
    Ellipsoid,
    /// Ellipsoid over the k nearest covariates.
    Knn,
    /// Degenerate DRO ball around the kernel-corrected prediction.
    Dro,
    /// Kernel-weighted residual-quantile norm ball.
    Individual,
    /// Empirical CVaR LP over kernel-resampled residuals.
    Cvar,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::PtcB,
        Method::PtcE,
        Method::Ellipsoid,
        Method::Knn,
        Method::Dro,
        Method::Individual,
        Method::Cvar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::PtcB => "ptc-b",
            Method::PtcE => "ptc-e",
            Method::Ellipsoid => "ellipsoid",
            Method::Knn => "knn",
            Method::Dro => "dro",
            Method::Individual => "individual",
            Method::Cvar => "cvar",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = PtcError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| PtcError::ConfigInvalid(format!("unknown method '{s}'")))
    }
}

fn default_d() -> usize {
    10
}
fn default_n() -> usize {
    20
}
fn default_trials() -> usize {
    20
}
fn default_var_samples() -> usize {
    1000
}
fn default_quantile_level() -> f64 {
    0.8
}
fn default_calibration_split() -> f64 {
    0.5
}
fn default_cvar_samples() -> usize {
    100
}
fn default_predictor() -> PredictorConfig {
    PredictorConfig::KernelRidgeRbf {
        lambda: 1e-3,
        bandwidth: None,
    }
}

/// Everything that determines a benchmark run. JSON keys mirror the CLI
/// flags; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub methods: Vec<Method>,
    pub alphas: Vec<f64>,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    /// Item count (knapsack only).
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Test covariates per trial; `None` uses 500 (100 for knapsack).
    #[serde(default)]
    pub test_points: Option<usize>,
    /// Conditional draws per test covariate for the VaR estimate.
    #[serde(default = "default_var_samples")]
    pub var_samples: usize,
    /// Knapsack constraint sets evaluated per test covariate (at most 10).
    #[serde(default)]
    pub constraint_sets: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_predictor")]
    pub predictor: PredictorConfig,
    #[serde(default)]
    pub quantile: QuantileConfig,
    /// Level at which `ĥ`/`ĝ` are fitted; one fit serves every α.
    #[serde(default = "default_quantile_level")]
    pub quantile_level: f64,
    /// Fraction of the validation split used to fit `ĥ`/`ĝ`.
    #[serde(default = "default_calibration_split")]
    pub calibration_split: f64,
    #[serde(default)]
    pub dro: DroConfig,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default = "default_cvar_samples")]
    pub cvar_samples: usize,
}

impl ExperimentConfig {
    /// Defaults for everything except problem, methods, alphas and `T`.
    pub fn new(problem: ProblemKind, methods: Vec<Method>, alphas: Vec<f64>, t: usize) -> Self {
        ExperimentConfig {
            problem,
            methods,
            alphas,
            t,
            d: default_d(),
            n: default_n(),
            trials: default_trials(),
            test_points: None,
            var_samples: default_var_samples(),
            constraint_sets: None,
            seed: 0,
            predictor: default_predictor(),
            quantile: QuantileConfig::default(),
            quantile_level: default_quantile_level(),
            calibration_split: default_calibration_split(),
            dro: DroConfig::default(),
            kernel: KernelSpec::default(),
            cvar_samples: default_cvar_samples(),
        }
    }

    pub fn test_points(&self) -> usize {
        self.test_points.unwrap_or(match self.problem {
            ProblemKind::Knapsack => 100,
            _ => 500,
        })
    }

    pub fn constraint_sets(&self) -> usize {
        match self.problem {
            ProblemKind::Knapsack => self.constraint_sets.unwrap_or(KNAPSACK_SETS),
            _ => 1,
        }
    }

    /// Objective dimension of the configured problem.
    pub fn cost_dim(&self) -> usize {
        match self.problem {
            ProblemKind::Toy => 1,
            ProblemKind::ShortestPath => crate::problems::SP_EDGES,
            ProblemKind::Knapsack => self.n,
        }
    }

    /// `(learning, validation, test)` sizes of the 60/20/20 split.
    pub fn split_sizes(&self) -> (usize, usize, usize) {
        let learn = self.t * 3 / 5;
        let val = self.t / 5;
        (learn, val, self.t - learn - val)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PtcError::ConfigInvalid(m));
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return bad(format!("method {m} listed twice"));
            }
        }
        if self.alphas.is_empty() {
            return bad("at least one alpha is required".into());
        }
        for a in &self.alphas {
            crate::error::check_alpha(*a)?;
        }
        if self.t < 20 {
            return bad(format!("T = {} is too small (need >= 20)", self.t));
        }
        if self.d == 0 || (self.problem != ProblemKind::Toy && self.d < 3) {
            return bad(format!("d = {} is too small for {}", self.d, self.problem));
        }
        if self.problem == ProblemKind::Knapsack && self.n == 0 {
            return bad("n must be >= 1".into());
        }
        if self.trials == 0 || self.var_samples == 0 || self.test_points() == 0 || self.cvar_samples == 0 {
            return bad("trials, test_points, var_samples and cvar_samples must be >= 1".into());
        }
        if let Some(k) = self.constraint_sets {
            if k == 0 || k > KNAPSACK_SETS {
                return bad(format!("constraint_sets must lie in 1..={KNAPSACK_SETS}"));
            }
        }
        crate::error::check_alpha(self.quantile_level)?;
        if !(self.calibration_split > 0.0 && self.calibration_split < 1.0) {
            return bad(format!("calibration_split {} must lie in (0, 1)", self.calibration_split));
        }
        let (_, val, _) = self.split_sizes();
        if val < 4 {
            return bad("validation split needs at least 4 samples".into());
        }
        self.predictor.validate()?;
        self.quantile.validate()?;
        self.dro.validate()?;
        Ok(())
    }
}
