//! Point predictors `f̂: ℝᵈ → ℝⁿ` and quantile regressors used for
//! calibration. Models are fitted once and immutable afterwards.

mod kernel;
mod linear;
pub mod mlp;
mod quantile;
pub mod record;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, PtcError, Result};
use crate::linalg::Matrix;

pub use kernel::{median_pairwise_distance, KernelRidgeModel};
pub use linear::LinearModel;
pub use mlp::{Loss, MlpConfig, MlpModel};
pub use quantile::{fit_quantile, pinball, QuantileConfig, QuantileKind, QuantileModel, DEFAULT_FLOOR};

/// Covariates `Z` (T×d) paired with objective vectors `C` (T×n).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub z: Matrix,
    pub c: Matrix,
}

impl Dataset {
    pub fn new(z: Matrix, c: Matrix) -> Result<Self> {
        check_dim("dataset row counts", z.rows(), c.rows())?;
        if !z.is_finite() || !c.is_finite() {
            return Err(PtcError::DomainError("dataset entries must be finite".into()));
        }
        Ok(Dataset { z, c })
    }

    pub fn len(&self) -> usize {
        self.z.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.rows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.z.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.cols()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            z: self.z.select_rows(idx),
            c: self.c.select_rows(idx),
        }
    }
}

/// Anything that maps a covariate vector to a vector.
pub trait PointModel {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn predict(&self, z: &[f64]) -> Result<Vec<f64>>;
}

impl<T: PointModel + ?Sized> PointModel for &T {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn predict(&self, z: &[f64]) -> Result<Vec<f64>> {
        (**self).predict(z)
    }
}

impl<T: PointModel + ?Sized> PointModel for Arc<T> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn predict(&self, z: &[f64]) -> Result<Vec<f64>> {
        (**self).predict(z)
    }
}

/// Adapter turning a closure into a [`PointModel`].
#[derive(Clone)]
pub struct FnModel<F> {
    input_dim: usize,
    output_dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> FnModel<F> {
    pub fn new(input_dim: usize, output_dim: usize, f: F) -> Self {
        FnModel {
            input_dim,
            output_dim,
            f,
        }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> PointModel for FnModel<F> {
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn predict(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim("covariate length", self.input_dim, z.len())?;
        let out = (self.f)(z);
        check_dim("model output length", self.output_dim, out.len())?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PredictorConfig {
    Linear {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    KernelRidgeRbf {
        #[serde(default = "default_lambda")]
        lambda: f64,
        /// RBF length scale σ; `None` selects the median pairwise distance.
        #[serde(default)]
        bandwidth: Option<f64>,
    },
    Mlp(MlpConfig),
}

fn default_lambda() -> f64 {
    1e-3
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig::Linear {
            lambda: default_lambda(),
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            PredictorConfig::Linear { lambda } => {
                if !(*lambda >= 0.0) || !lambda.is_finite() {
                    return Err(PtcError::ConfigInvalid(format!("ridge lambda {lambda} must be >= 0")));
                }
            }
            PredictorConfig::KernelRidgeRbf { lambda, bandwidth } => {
                if !(*lambda >= 0.0) || !lambda.is_finite() {
                    return Err(PtcError::ConfigInvalid(format!("ridge lambda {lambda} must be >= 0")));
                }
                if let Some(h) = bandwidth {
                    if !(*h > 0.0) || !h.is_finite() {
                        return Err(PtcError::ConfigInvalid(format!("RBF bandwidth {h} must be > 0")));
                    }
                }
            }
            PredictorConfig::Mlp(cfg) => cfg.validate()?,
        }
        Ok(())
    }
}

/// A fitted point-prediction model.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Linear(LinearModel),
    KernelRidgeRbf(KernelRidgeModel),
    Mlp(MlpModel),
}

impl PointModel for Predictor {
    fn input_dim(&self) -> usize {
        match self {
            Predictor::Linear(m) => m.input_dim(),
            Predictor::KernelRidgeRbf(m) => m.input_dim(),
            Predictor::Mlp(m) => m.input_dim(),
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            Predictor::Linear(m) => m.output_dim(),
            Predictor::KernelRidgeRbf(m) => m.output_dim(),
            Predictor::Mlp(m) => m.output_dim(),
        }
    }

    fn predict(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim("covariate length", self.input_dim(), z.len())?;
        Ok(match self {
            Predictor::Linear(m) => m.predict(z),
            Predictor::KernelRidgeRbf(m) => m.predict(z),
            Predictor::Mlp(m) => m.predict(z),
        })
    }
}

/// Fit a point predictor on `data`. Deterministic in `(data, config, seed)`.
pub fn fit_predictor(data: &Dataset, config: &PredictorConfig, seed: u64) -> Result<Predictor> {
    config.validate()?;
    if data.len() < 2 {
        return Err(PtcError::TooFewSamples {
            needed: 2,
            have: data.len(),
        });
    }
    Ok(match config {
        PredictorConfig::Linear { lambda } => Predictor::Linear(LinearModel::fit_ridge(&data.z, &data.c, *lambda)?),
        PredictorConfig::KernelRidgeRbf { lambda, bandwidth } => {
            Predictor::KernelRidgeRbf(KernelRidgeModel::fit(&data.z, &data.c, *lambda, *bandwidth)?)
        }
        PredictorConfig::Mlp(cfg) => Predictor::Mlp(MlpModel::fit(&data.z, &data.c, cfg, Loss::Squared, seed)?),
    })
}

/// Predict for one covariate vector.
pub fn predict<M: PointModel + ?Sized>(model: &M, z: &[f64]) -> Result<Vec<f64>> {
    model.predict(z)
}

/// Predictions for each row of `z`.
pub fn predict_rows<M: PointModel + ?Sized>(model: &M, z: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(z.rows(), model.output_dim());
    for (i, row) in z.row_iter().enumerate() {
        out.row_mut(i).copy_from_slice(&model.predict(row)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_data() -> Dataset {
        let z = Matrix::from_vec(10, 1, (0..10).map(|i| i as f64).collect()).unwrap();
        let c = Matrix::from_vec(10, 1, (0..10).map(|i| 2.0 * i as f64).collect()).unwrap();
        Dataset::new(z, c).unwrap()
    }

    #[test]
    fn ridge_recovers_exact_slope() {
        let p = fit_predictor(&line_data(), &PredictorConfig::Linear { lambda: 1e-10 }, 0).unwrap();
        let Predictor::Linear(m) = &p else { panic!() };
        assert!((m.weights()[(0, 0)] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn huge_ridge_shrinks_to_zero() {
        let p = fit_predictor(&line_data(), &PredictorConfig::Linear { lambda: 1e12 }, 0).unwrap();
        let Predictor::Linear(m) = &p else { panic!() };
        assert!(m.weights()[(0, 0)].abs() <= 1e-6 * 18.0);
    }

    #[test]
    fn kernel_ridge_interpolates() {
        let data = line_data();
        let p = fit_predictor(
            &data,
            &PredictorConfig::KernelRidgeRbf {
                lambda: 1e-10,
                bandwidth: None,
            },
            0,
        )
        .unwrap();
        for (z, c) in data.z.row_iter().zip(data.c.row_iter()) {
            assert!((p.predict(z).unwrap()[0] - c[0]).abs() < 1e-4);
        }
    }

    #[test]
    fn linear_predict_example() {
        let m = LinearModel::new(Matrix::from_rows(&[[1.0], [0.0]]).unwrap(), vec![0.0]).unwrap();
        let p = Predictor::Linear(m);
        assert_eq!(p.predict(&[3.0, 5.0]).unwrap(), vec![3.0]);
        assert!(matches!(p.predict(&[1.0]), Err(PtcError::DimensionMismatch(_))));
    }

    #[test]
    fn predictions_are_bitwise_repeatable() {
        let cfg = PredictorConfig::Mlp(MlpConfig {
            epochs: 5,
            ..MlpConfig::default()
        });
        let p = fit_predictor(&line_data(), &cfg, 3).unwrap();
        let a = p.predict(&[1.5]).unwrap();
        let b = p.predict(&[1.5]).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        let q = fit_predictor(&line_data(), &cfg, 3).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = PredictorConfig::KernelRidgeRbf {
            lambda: 1.0,
            bandwidth: Some(0.0),
        };
        assert!(matches!(fit_predictor(&line_data(), &bad, 0), Err(PtcError::ConfigInvalid(_))));
        let bad = PredictorConfig::Linear { lambda: -1.0 };
        assert!(matches!(fit_predictor(&line_data(), &bad, 0), Err(PtcError::ConfigInvalid(_))));
    }

    #[test]
    fn config_json_roundtrip() {
        let cfg = PredictorConfig::KernelRidgeRbf {
            lambda: 0.5,
            bandwidth: None,
        };
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<PredictorConfig>(&s).unwrap(), cfg);
        assert!(serde_json::from_str::<PredictorConfig>(r#"{"kind":"linear","bogus":1}"#).is_err());
    }
}
