use serde::{Deserialize, Serialize};

use super::linear::LinearModel;
use super::mlp::{Loss, MlpConfig, MlpModel};
use crate::error::{check_alpha, check_dim, PtcError, Result};
use crate::linalg::{axpy, Matrix};

/// Default positive lower clamp on quantile predictions.
pub const DEFAULT_FLOOR: f64 = 1e-6;

/// Pinball loss `ρ_α(u) = α·u⁺ + (1−α)·(−u)⁺`.
pub fn pinball(u: f64, alpha: f64) -> f64 {
    if u >= 0.0 {
        alpha * u
    } else {
        (alpha - 1.0) * u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantileKind {
    LinearPinball,
    MlpPinball,
    /// Covariate-free: the empirical α-quantile of each target column.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum QuantileConfig {
    LinearPinball {
        #[serde(default = "default_iterations")]
        iterations: usize,
        #[serde(default = "default_floor")]
        floor: f64,
    },
    MlpPinball {
        #[serde(default)]
        mlp: MlpConfig,
        #[serde(default = "default_floor")]
        floor: f64,
    },
    Constant {
        #[serde(default = "default_floor")]
        floor: f64,
    },
}

fn default_iterations() -> usize {
    2000
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR
}

impl Default for QuantileConfig {
    fn default() -> Self {
        QuantileConfig::LinearPinball {
            iterations: default_iterations(),
            floor: DEFAULT_FLOOR,
        }
    }
}

impl QuantileConfig {
    pub fn floor(&self) -> f64 {
        match self {
            QuantileConfig::LinearPinball { floor, .. }
            | QuantileConfig::MlpPinball { floor, .. }
            | QuantileConfig::Constant { floor } => *floor,
        }
    }

    pub fn kind(&self) -> QuantileKind {
        match self {
            QuantileConfig::LinearPinball { .. } => QuantileKind::LinearPinball,
            QuantileConfig::MlpPinball { .. } => QuantileKind::MlpPinball,
            QuantileConfig::Constant { .. } => QuantileKind::Constant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let floor = self.floor();
        if !(floor > 0.0) || !floor.is_finite() {
            return Err(PtcError::ConfigInvalid(format!("quantile floor {floor} must be > 0")));
        }
        match self {
            QuantileConfig::LinearPinball { iterations, .. } if *iterations == 0 => {
                Err(PtcError::ConfigInvalid("quantile iterations must be positive".into()))
            }
            QuantileConfig::MlpPinball { mlp, .. } => mlp.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum QuantileInner {
    Linear(LinearModel),
    Mlp(MlpModel),
    Constant { input_dim: usize, values: Vec<f64> },
}

/// Fitted conditional-quantile regressor; predictions are clamped at `floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileModel {
    pub(crate) inner: QuantileInner,
    alpha: f64,
    floor: f64,
}

impl QuantileModel {
    /// A model that predicts `values` for every covariate.
    pub fn constant(input_dim: usize, values: Vec<f64>, alpha: f64, floor: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(floor > 0.0) {
            return Err(PtcError::ConfigInvalid(format!("quantile floor {floor} must be > 0")));
        }
        Ok(QuantileModel {
            inner: QuantileInner::Constant { input_dim, values },
            alpha,
            floor,
        })
    }

    pub(crate) fn from_inner(inner: QuantileInner, alpha: f64, floor: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(floor > 0.0) {
            return Err(PtcError::Format(format!("quantile floor {floor} must be > 0")));
        }
        Ok(QuantileModel { inner, alpha, floor })
    }

    pub fn kind(&self) -> QuantileKind {
        match self.inner {
            QuantileInner::Linear(_) => QuantileKind::LinearPinball,
            QuantileInner::Mlp(_) => QuantileKind::MlpPinball,
            QuantileInner::Constant { .. } => QuantileKind::Constant,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn input_dim(&self) -> usize {
        match &self.inner {
            QuantileInner::Linear(m) => m.input_dim(),
            QuantileInner::Mlp(m) => m.input_dim(),
            QuantileInner::Constant { input_dim, .. } => *input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.inner {
            QuantileInner::Linear(m) => m.output_dim(),
            QuantileInner::Mlp(m) => m.output_dim(),
            QuantileInner::Constant { values, .. } => values.len(),
        }
    }

    /// Unclamped model output.
    pub fn predict_raw(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim("covariate length", self.input_dim(), z.len())?;
        Ok(match &self.inner {
            QuantileInner::Linear(m) => m.predict(z),
            QuantileInner::Mlp(m) => m.predict(z),
            QuantileInner::Constant { values, .. } => values.clone(),
        })
    }

    pub fn predict(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.predict_raw(z)?;
        for v in out.iter_mut() {
            // NaN also falls back to the floor
            if !(*v >= self.floor) {
                *v = self.floor;
            }
        }
        Ok(out)
    }
}

impl super::PointModel for QuantileModel {
    fn input_dim(&self) -> usize {
        QuantileModel::input_dim(self)
    }
    fn output_dim(&self) -> usize {
        QuantileModel::output_dim(self)
    }
    fn predict(&self, z: &[f64]) -> Result<Vec<f64>> {
        QuantileModel::predict(self, z)
    }
}

/// `⌈αT⌉`-th smallest value (lower order statistic), guarded against
/// round-off pushing an exact product over an integer.
pub(crate) fn empirical_quantile(values: &mut [f64], alpha: f64) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let t = values.len();
    let k = ((alpha * t as f64 - 1e-9).ceil() as usize).clamp(1, t);
    values[k - 1]
}

fn mean_pinball(u: impl Iterator<Item = f64>, alpha: f64, t: usize) -> f64 {
    u.map(|v| pinball(v, alpha)).sum::<f64>() / t as f64
}

/// Full-batch subgradient descent on standardized covariates for a single
/// output column. Returns `(weights, intercept)` in raw covariate units.
fn fit_linear_column(xs: &Matrix, y: &[f64], alpha: f64, iterations: usize) -> (Vec<f64>, f64) {
    let t = xs.rows();
    let d = xs.cols();
    let mut sorted = y.to_vec();
    let b0 = empirical_quantile(&mut sorted, alpha);
    let spread = {
        let m = y.iter().sum::<f64>() / t as f64;
        let s = (y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / t as f64).sqrt();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    let mut w = vec![0.0; d];
    let mut b = b0;
    let loss_at = |w: &[f64], b: f64| {
        mean_pinball(
            xs.row_iter().zip(y).map(|(x, yt)| yt - b - crate::linalg::dot(w, x)),
            alpha,
            t,
        )
    };
    let mut best = (loss_at(&w, b), w.clone(), b);
    let step0 = spread;
    let mut gw = vec![0.0; d];
    for k in 1..=iterations {
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for (x, yt) in xs.row_iter().zip(y) {
            let u = yt - b - crate::linalg::dot(&w, x);
            let g = if u > 0.0 {
                -alpha
            } else if u < 0.0 {
                1.0 - alpha
            } else {
                0.0
            };
            if g != 0.0 {
                axpy(g, x, &mut gw);
                gb += g;
            }
        }
        let step = step0 / (k as f64).sqrt() / t as f64;
        axpy(-step, &gw, &mut w);
        b -= step * gb;
        let l = loss_at(&w, b);
        if l < best.0 {
            best = (l, w.clone(), b);
        }
    }
    let (_, w, _) = best;
    // exact intercept for the chosen slope
    let mut shifted: Vec<f64> = xs
        .row_iter()
        .zip(y)
        .map(|(x, yt)| yt - crate::linalg::dot(&w, x))
        .collect();
    let b = empirical_quantile(&mut shifted, alpha);
    (w, b)
}

/// Fit a quantile regressor of `targets` (T×k) on `z` (T×d) at level `alpha`.
pub fn fit_quantile(z: &Matrix, targets: &Matrix, alpha: f64, config: &QuantileConfig, seed: u64) -> Result<QuantileModel> {
    check_alpha(alpha).map_err(|_| PtcError::ConfigInvalid(format!("alpha {alpha} must lie in (0,1)")))?;
    config.validate()?;
    check_dim("quantile training rows", z.rows(), targets.rows())?;
    if !targets.is_finite() || !z.is_finite() {
        return Err(PtcError::ConfigInvalid("quantile training data must be finite".into()));
    }
    let t = z.rows();
    if t == 0 {
        return Err(PtcError::TooFewSamples { needed: 1, have: 0 });
    }
    let floor = config.floor();
    let inner = match config {
        QuantileConfig::Constant { .. } => {
            let values = (0..targets.cols())
                .map(|j| empirical_quantile(&mut targets.column(j), alpha))
                .collect();
            QuantileInner::Constant {
                input_dim: z.cols(),
                values,
            }
        }
        QuantileConfig::LinearPinball { iterations, .. } => {
            let d = z.cols();
            let mut mean = vec![0.0; d];
            for r in z.row_iter() {
                axpy(1.0 / t as f64, r, &mut mean);
            }
            let mut scale = vec![0.0; d];
            for r in z.row_iter() {
                for j in 0..d {
                    scale[j] += (r[j] - mean[j]).powi(2) / t as f64;
                }
            }
            scale.iter_mut().for_each(|s| {
                *s = if *s > 1e-24 { s.sqrt() } else { 0.0 };
            });
            let mut xs = z.clone();
            for i in 0..t {
                for (j, v) in xs.row_mut(i).iter_mut().enumerate() {
                    *v = if scale[j] > 0.0 { (*v - mean[j]) / scale[j] } else { 0.0 };
                }
            }
            let n = targets.cols();
            let mut weights = Matrix::zeros(d, n);
            let mut intercept = vec![0.0; n];
            for j in 0..n {
                let (w, b) = fit_linear_column(&xs, &targets.column(j), alpha, *iterations);
                // undo standardization: w_s·(z−μ)/σ + b
                let mut b_raw = b;
                for i in 0..d {
                    if scale[i] > 0.0 {
                        let wr = w[i] / scale[i];
                        weights[(i, j)] = wr;
                        b_raw -= wr * mean[i];
                    }
                }
                intercept[j] = b_raw;
            }
            QuantileInner::Linear(LinearModel::new(weights, intercept)?)
        }
        QuantileConfig::MlpPinball { mlp, .. } => {
            QuantileInner::Mlp(MlpModel::fit(z, targets, mlp, Loss::Pinball(alpha), seed)?)
        }
    };
    Ok(QuantileModel { inner, alpha, floor })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const_cov(t: usize) -> Matrix {
        Matrix::from_vec(t, 1, vec![1.0; t]).unwrap()
    }

    #[test]
    fn pinball_values() {
        assert_eq!(pinball(2.0, 0.8), 1.6);
        assert!((pinball(-2.0, 0.8) - 0.4).abs() < 1e-15);
        assert_eq!(pinball(0.0, 0.3), 0.0);
    }

    #[test]
    fn constant_targets_are_reproduced() {
        let z = Matrix::from_vec(20, 2, (0..40).map(|i| (i as f64).sin()).collect()).unwrap();
        let y = Matrix::from_vec(20, 1, vec![2.0; 20]).unwrap();
        for alpha in [0.1, 0.5, 0.9] {
            for cfg in [
                QuantileConfig::default(),
                QuantileConfig::Constant { floor: DEFAULT_FLOOR },
            ] {
                let m = fit_quantile(&z, &y, alpha, &cfg, 0).unwrap();
                for r in z.row_iter() {
                    assert!((m.predict(r).unwrap()[0] - 2.0).abs() < 1e-3);
                }
            }
        }
    }

    #[test]
    fn linear_quantile_of_one_to_hundred() {
        let z = const_cov(100);
        let y = Matrix::from_vec(100, 1, (1..=100).map(|v| v as f64).collect()).unwrap();
        let m = fit_quantile(&z, &y, 0.9, &QuantileConfig::default(), 0).unwrap();
        let p = m.predict(&[1.0]).unwrap()[0];
        assert!((89.0..=91.0).contains(&p), "{p}");
    }

    #[test]
    fn median_is_lad_fit() {
        let z = const_cov(2);
        let y = Matrix::from_rows(&[[-1.0], [1.0]]).unwrap();
        let m = fit_quantile(&z, &y, 0.5, &QuantileConfig::default(), 0).unwrap();
        let p = m.predict_raw(&[1.0]).unwrap()[0];
        assert!((-1.0..=1.0).contains(&p));
        let lad = ((-1.0 - p) as f64).abs() + (1.0 - p).abs();
        assert!((lad / 2.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_quantile_tracks_heteroscedastic_scale() {
        // y = z·u with u uniform on a grid in [0,1]: 0.8-quantile is 0.8·z
        let mut zs = Vec::new();
        let mut ys = Vec::new();
        for i in 1..=20 {
            for j in 0..50 {
                let z = i as f64 / 10.0;
                zs.push(z);
                ys.push(z * (j as f64 + 0.5) / 50.0);
            }
        }
        let z = Matrix::from_vec(1000, 1, zs).unwrap();
        let y = Matrix::from_vec(1000, 1, ys).unwrap();
        let m = fit_quantile(&z, &y, 0.8, &QuantileConfig::default(), 0).unwrap();
        for zq in [0.5, 1.0, 1.5] {
            let p = m.predict(&[zq]).unwrap()[0];
            assert!((p - 0.8 * zq).abs() < 0.05, "z={zq} p={p}");
        }
    }

    #[test]
    fn predictions_respect_floor() {
        let m = QuantileModel::constant(1, vec![-5.0, 0.0, 3.0], 0.5, 1e-6).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), vec![1e-6, 1e-6, 3.0]);
        assert!(matches!(m.predict(&[0.0, 1.0]), Err(PtcError::DimensionMismatch(_))));
    }

    #[test]
    fn invalid_alpha_is_config_error() {
        let z = const_cov(3);
        let y = Matrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        for a in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(
                fit_quantile(&z, &y, a, &QuantileConfig::default(), 0),
                Err(PtcError::ConfigInvalid(_))
            ));
        }
    }

    #[test]
    fn mlp_pinball_fits_constant_quantile() {
        let z = Matrix::from_vec(200, 1, (0..200).map(|i| (i % 7) as f64).collect()).unwrap();
        let y = Matrix::from_vec(200, 1, (0..200).map(|i| (i % 10) as f64).collect()).unwrap();
        let cfg = QuantileConfig::MlpPinball {
            mlp: MlpConfig {
                hidden: vec![8],
                epochs: 100,
                learning_rate: 1e-2,
                batch_size: 32,
            },
            floor: DEFAULT_FLOOR,
        };
        let m = fit_quantile(&z, &y, 0.5, &cfg, 1).unwrap();
        let p = m.predict(&[3.0]).unwrap()[0];
        assert!((3.0..=6.5).contains(&p), "{p}");
    }
}
