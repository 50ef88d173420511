//! Split-conformal calibration of contextual uncertainty sets.
//!
//! A preliminary scale model (`ĥ` for boxes, `ĝ` for ellipsoids) is fitted on
//! one half of the validation data; the other half supplies conformity scores
//! whose order statistic becomes the global multiplier `η`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;

use crate::dro::{kernel_weights, KernelSpec};
use crate::error::{check_dim, PtcError, Result};
use crate::linalg::{cholesky_jittered, mahalanobis, norm2, Matrix, PsdFactor, DEFAULT_JITTER_REL};
use crate::predictors::record::{Persist, Record};
use crate::predictors::{fit_quantile, PointModel, Predictor, QuantileConfig, QuantileModel};
use crate::rng::StreamKey;
use crate::uncertainty::UncertaintySet;

/// Guard against `α(N+1)` landing a hair above an integer through round-off.
const CEIL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub d1: Vec<usize>,
    pub d2: Vec<usize>,
}

/// Seeded permutation of `0..t`; the first `⌈ratio·t⌉` indices form `D₁`
/// (clamped so both halves are nonempty).
pub fn split_validation(t: usize, ratio: f64, seed: u64) -> Result<SplitIndices> {
    if t < 4 {
        return Err(PtcError::TooFewSamples { needed: 4, have: t });
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(PtcError::ConfigInvalid(format!("split ratio {ratio} must lie in (0,1)")));
    }
    let mut idx: Vec<usize> = (0..t).collect();
    idx.shuffle(&mut StreamKey::new(seed, "split").rng());
    let n1 = ((ratio * t as f64 - CEIL_EPS).ceil() as usize).clamp(1, t - 1);
    let d2 = idx.split_off(n1);
    Ok(SplitIndices { d1: idx, d2 })
}

/// Row `t` is `c_t − f̂(z_t)`.
pub fn residuals<F: PointModel + ?Sized>(f: &F, z: &Matrix, c: &Matrix) -> Result<Matrix> {
    check_dim("residual rows", z.rows(), c.rows())?;
    check_dim("objective dimension", f.output_dim(), c.cols())?;
    let mut r = c.clone();
    for (i, zr) in z.row_iter().enumerate() {
        let p = f.predict(zr)?;
        for (v, pv) in r.row_mut(i).iter_mut().zip(&p) {
            *v -= pv;
        }
    }
    Ok(r)
}

/// Index (1-based) of the conformal order statistic:
/// `k = min{N, ⌈α(N+1)⌉}`.
pub fn conformal_rank(n: usize, alpha: f64) -> usize {
    let k = (alpha * (n as f64 + 1.0) - CEIL_EPS).ceil();
    (k.max(1.0) as usize).min(n)
}

/// The `k`-th smallest score, `k = min{N, ⌈α(N+1)⌉}`. May be `+∞`.
pub fn conformal_eta(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(PtcError::EmptyScores);
    }
    crate::error::check_alpha(alpha)?;
    if scores.iter().any(|s| s.is_nan() || *s < 0.0) {
        return Err(PtcError::DomainError("scores must be nonnegative".into()));
    }
    let mut s = scores.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    Ok(s[conformal_rank(s.len(), alpha) - 1])
}

/// Minimal `η` with `f̂ − ηĥ ≤ c ≤ f̂ + ηĥ`: `max_i |r_i| / max(ĥ_i, floor)`.
pub fn box_score(r: &[f64], h: &[f64], floor: f64) -> f64 {
    r.iter()
        .zip(h)
        .map(|(ri, hi)| ri.abs() / hi.max(floor))
        .fold(0.0, f64::max)
}

/// `mahalanobis(r) / max(ĝ, floor)`.
pub fn ellipsoid_score(r: &[f64], factor: &PsdFactor, g: f64, floor: f64) -> Result<f64> {
    Ok(mahalanobis(r, factor)? / g.max(floor))
}

/// A fitted map `z ↦ U(z)` with a conformity score.
pub trait Calibration {
    fn alpha(&self) -> f64;
    fn eta(&self) -> f64;
    /// True when the required order statistic was `+∞`; sets then fall back
    /// to the observed residual range.
    fn infinite_eta(&self) -> bool {
        !self.eta().is_finite()
    }
    fn set_at(&self, z: &[f64]) -> Result<UncertaintySet>;
    /// Minimal `η` for which `set_at(z)` would contain `c`.
    fn score(&self, z: &[f64], c: &[f64]) -> Result<f64>;
}

fn abs_matrix(m: &Matrix) -> Matrix {
    let data = m.as_slice().iter().map(|v| v.abs()).collect();
    Matrix::from_vec(m.rows(), m.cols(), data).expect("same shape")
}

fn max_abs_columns(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0f64; m.cols()];
    for r in m.row_iter() {
        for (o, v) in out.iter_mut().zip(r) {
            *o = o.max(v.abs());
        }
    }
    out
}

/// Box sets `[f̂(z) − ηĥ(z), f̂(z) + ηĥ(z)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCalibration<F = Predictor> {
    pub predictor: F,
    pub h: QuantileModel,
    eta: f64,
    alpha: f64,
    /// D₂ conformity scores in input order.
    scores: Vec<f64>,
    /// Largest absolute residual per coordinate over the validation set.
    residual_range: Vec<f64>,
}

impl<F: PointModel> BoxCalibration<F> {
    /// Conformal step with fixed `f̂`, `ĥ` on a calibration sample `(z2, c2)`.
    pub fn calibrate(predictor: F, h: QuantileModel, z2: &Matrix, c2: &Matrix, alpha: f64) -> Result<Self> {
        check_dim("scale model outputs", predictor.output_dim(), h.output_dim())?;
        let r = residuals(&predictor, z2, c2)?;
        let floor = h.floor();
        let scores = z2
            .row_iter()
            .zip(r.row_iter())
            .map(|(z, ri)| Ok(box_score(ri, &h.predict(z)?, floor)))
            .collect::<Result<Vec<_>>>()?;
        let eta = conformal_eta(&scores, alpha)?;
        Ok(BoxCalibration {
            predictor,
            h,
            eta,
            alpha,
            scores,
            residual_range: max_abs_columns(&r),
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Same models, `η` recomputed from the stored scores at a new level.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self>
    where
        F: Clone,
    {
        let mut out = self.clone();
        out.eta = conformal_eta(&self.scores, alpha)?;
        out.alpha = alpha;
        Ok(out)
    }
}

impl<F: PointModel> Calibration for BoxCalibration<F> {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn set_at(&self, z: &[f64]) -> Result<UncertaintySet> {
        let f = self.predictor.predict(z)?;
        if self.infinite_eta() {
            let lower = f.iter().zip(&self.residual_range).map(|(a, r)| a - r).collect();
            let upper = f.iter().zip(&self.residual_range).map(|(a, r)| a + r).collect();
            return UncertaintySet::new_box(lower, upper);
        }
        let h = self.h.predict(z)?;
        let lower = f.iter().zip(&h).map(|(a, b)| a - self.eta * b).collect();
        let upper = f.iter().zip(&h).map(|(a, b)| a + self.eta * b).collect();
        UncertaintySet::new_box(lower, upper)
    }

    fn score(&self, z: &[f64], c: &[f64]) -> Result<f64> {
        let f = self.predictor.predict(z)?;
        check_dim("objective vector", f.len(), c.len())?;
        let r: Vec<f64> = c.iter().zip(&f).map(|(a, b)| a - b).collect();
        Ok(box_score(&r, &self.h.predict(z)?, self.h.floor()))
    }
}

/// Box uncertainty quantification: split, fit `ĥ` on `|r|` over `D₁`,
/// conformalize on `D₂`.
pub fn buq_fit<F: PointModel>(
    predictor: F,
    z_val: &Matrix,
    c_val: &Matrix,
    alpha: f64,
    split_ratio: f64,
    quantile_config: &QuantileConfig,
    seed: u64,
) -> Result<BoxCalibration<F>> {
    crate::error::check_alpha(alpha)?;
    let split = split_validation(z_val.rows(), split_ratio, seed)?;
    let r = residuals(&predictor, z_val, c_val)?;
    let z1 = z_val.select_rows(&split.d1);
    let targets = abs_matrix(&r.select_rows(&split.d1));
    let h = fit_quantile(&z1, &targets, alpha, quantile_config, StreamKey::new(seed, "buq-h").raw())?;
    let mut cal = BoxCalibration::calibrate(
        predictor,
        h,
        &z_val.select_rows(&split.d2),
        &c_val.select_rows(&split.d2),
        alpha,
    )?;
    cal.residual_range = max_abs_columns(&r);
    Ok(cal)
}

/// Ellipsoid sets `{c : mahalanobis(c − f̂(z)) ≤ η ĝ(z)}` with shape `Σ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidCalibration<F = Predictor> {
    pub predictor: F,
    pub g: QuantileModel,
    pub factor: PsdFactor,
    eta: f64,
    alpha: f64,
    scores: Vec<f64>,
    /// Largest unscaled Mahalanobis residual over the validation set.
    residual_range: f64,
}

/// `Σ̂ = (1/T) Σ_t (r_t/ĝ_t)(r_t/ĝ_t)ᵀ`.
pub fn scaled_covariance(r: &Matrix, g: &[f64], floor: f64) -> Result<Matrix> {
    check_dim("scale values", r.rows(), g.len())?;
    let n = r.cols();
    let t = r.rows().max(1) as f64;
    let mut s = Matrix::zeros(n, n);
    for (row, gi) in r.row_iter().zip(g) {
        let inv = 1.0 / gi.max(floor);
        for i in 0..n {
            let a = row[i] * inv;
            for j in 0..=i {
                s[(i, j)] += a * row[j] * inv / t;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            s[(j, i)] = s[(i, j)];
        }
    }
    Ok(s)
}

impl<F: PointModel> EllipsoidCalibration<F> {
    /// Conformal step with fixed `f̂`, `ĝ` and shape factor.
    pub fn calibrate(predictor: F, g: QuantileModel, factor: PsdFactor, z2: &Matrix, c2: &Matrix, alpha: f64) -> Result<Self> {
        check_dim("scale model outputs", 1, g.output_dim())?;
        check_dim("shape dimension", predictor.output_dim(), factor.dim())?;
        let r = residuals(&predictor, z2, c2)?;
        let floor = g.floor();
        let mut range = 0.0f64;
        let scores = z2
            .row_iter()
            .zip(r.row_iter())
            .map(|(z, ri)| {
                range = range.max(mahalanobis(ri, &factor)?);
                ellipsoid_score(ri, &factor, g.predict(z)?[0], floor)
            })
            .collect::<Result<Vec<_>>>()?;
        let eta = conformal_eta(&scores, alpha)?;
        Ok(EllipsoidCalibration {
            predictor,
            g,
            factor,
            eta,
            alpha,
            scores,
            residual_range: range,
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self>
    where
        F: Clone,
    {
        let mut out = self.clone();
        out.eta = conformal_eta(&self.scores, alpha)?;
        out.alpha = alpha;
        Ok(out)
    }
}

impl<F: PointModel> Calibration for EllipsoidCalibration<F> {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn set_at(&self, z: &[f64]) -> Result<UncertaintySet> {
        let f = self.predictor.predict(z)?;
        let radius = if self.infinite_eta() {
            self.residual_range
        } else {
            self.eta * self.g.predict(z)?[0]
        };
        UncertaintySet::new_ellipsoid(f, self.factor.clone(), radius)
    }

    fn score(&self, z: &[f64], c: &[f64]) -> Result<f64> {
        let f = self.predictor.predict(z)?;
        check_dim("objective vector", f.len(), c.len())?;
        let r: Vec<f64> = c.iter().zip(&f).map(|(a, b)| a - b).collect();
        ellipsoid_score(&r, &self.factor, self.g.predict(z)?[0], self.g.floor())
    }
}

/// Ellipsoid uncertainty quantification: split, fit scalar `ĝ` on `‖r‖₂`
/// over `D₁`, estimate `Σ̂` from scaled residuals, conformalize on `D₂`.
pub fn euq_fit<F: PointModel>(
    predictor: F,
    z_val: &Matrix,
    c_val: &Matrix,
    alpha: f64,
    split_ratio: f64,
    quantile_config: &QuantileConfig,
    seed: u64,
) -> Result<EllipsoidCalibration<F>> {
    crate::error::check_alpha(alpha)?;
    if predictor.output_dim() == 0 {
        return Err(PtcError::DimensionMismatch("objective dimension must be >= 1".into()));
    }
    let split = split_validation(z_val.rows(), split_ratio, seed)?;
    let r = residuals(&predictor, z_val, c_val)?;
    let z1 = z_val.select_rows(&split.d1);
    let r1 = r.select_rows(&split.d1);
    let norms = Matrix::from_vec(r1.rows(), 1, r1.row_iter().map(norm2).collect())?;
    let g = fit_quantile(&z1, &norms, alpha, quantile_config, StreamKey::new(seed, "euq-g").raw())?;
    let gv = z1
        .row_iter()
        .map(|z| Ok(g.predict(z)?[0]))
        .collect::<Result<Vec<_>>>()?;
    let sigma = scaled_covariance(&r1, &gv, g.floor())?;
    let factor = cholesky_jittered(&sigma, DEFAULT_JITTER_REL)?;
    let mut cal = EllipsoidCalibration::calibrate(
        predictor,
        g,
        factor,
        &z_val.select_rows(&split.d2),
        &c_val.select_rows(&split.d2),
        alpha,
    )?;
    cal.residual_range = r
        .row_iter()
        .map(|ri| mahalanobis(ri, &cal.factor))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(cal)
}

/// Smallest value `v` among `values` whose cumulative weight (in ascending
/// order of `values`) reaches `alpha`.
pub fn weighted_radius(values: &[f64], weights: &[f64], alpha: f64) -> Result<f64> {
    check_dim("weights length", values.len(), weights.len())?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(PtcError::ConfigInvalid(format!("alpha {alpha} must lie in (0,1]")));
    }
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| (*v, *w))
        .collect();
    if pairs.is_empty() {
        return Err(PtcError::NoNeighbors);
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for (v, w) in &pairs {
        acc += w / total;
        if acc >= alpha - 1e-12 {
            return Ok(*v);
        }
    }
    Ok(pairs.last().expect("nonempty").0)
}

/// Norm ball around `f̂(z₀)` whose radius is the kernel-weighted
/// α-quantile of validation residual norms.
#[allow(clippy::too_many_arguments)]
pub fn individual_fit<F: PointModel + ?Sized>(
    predictor: &F,
    z_val: &Matrix,
    c_val: &Matrix,
    alpha: f64,
    kernel: &KernelSpec,
    bandwidth: f64,
    z0: &[f64],
) -> Result<UncertaintySet> {
    let r = residuals(predictor, z_val, c_val)?;
    individual_fit_residuals(predictor, z_val, &r, alpha, kernel, bandwidth, z0)
}

/// [`individual_fit`] with precomputed residuals.
pub fn individual_fit_residuals<F: PointModel + ?Sized>(
    predictor: &F,
    z_val: &Matrix,
    residuals: &Matrix,
    alpha: f64,
    kernel: &KernelSpec,
    bandwidth: f64,
    z0: &[f64],
) -> Result<UncertaintySet> {
    let w = kernel_weights(z_val, z0, kernel, bandwidth)?;
    let norms: Vec<f64> = residuals.row_iter().map(norm2).collect();
    let radius = weighted_radius(&norms, &w, alpha)?;
    UncertaintySet::new_norm_ball(predictor.predict(z0)?, radius)
}

/// `count` draws of `f̂(z₀) + r` with `r` sampled from the kernel-weighted
/// empirical residual distribution at `z₀`.
#[allow(clippy::too_many_arguments)]
pub fn sample_conditional<F: PointModel + ?Sized>(
    predictor: &F,
    z_val: &Matrix,
    c_val: &Matrix,
    kernel: &KernelSpec,
    bandwidth: f64,
    z0: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let r = residuals(predictor, z_val, c_val)?;
    sample_conditional_residuals(predictor, z_val, &r, kernel, bandwidth, z0, count, seed)
}

/// [`sample_conditional`] with precomputed residuals.
#[allow(clippy::too_many_arguments)]
pub fn sample_conditional_residuals<F: PointModel + ?Sized>(
    predictor: &F,
    z_val: &Matrix,
    residuals: &Matrix,
    kernel: &KernelSpec,
    bandwidth: f64,
    z0: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let w = kernel_weights(z_val, z0, kernel, bandwidth)?;
    let dist = WeightedIndex::new(&w).map_err(|_| PtcError::NoNeighbors)?;
    let f = predictor.predict(z0)?;
    let mut rng = StreamKey::new(seed, "conditional-sample").rng();
    Ok((0..count)
        .map(|_| {
            let r = residuals.row(dist.sample(&mut rng));
            f.iter().zip(r).map(|(a, b)| a + b).collect()
        })
        .collect())
}

impl Persist for BoxCalibration<Predictor> {
    fn to_record(&self) -> Record {
        Record::new("box-calibration")
            .scalar("eta", self.eta)
            .scalar("alpha", self.alpha)
            .vector("scores", &self.scores)
            .vector("residual_range", &self.residual_range)
            .child(self.predictor.to_record())
            .child(self.h.to_record())
    }

    fn from_record(rec: &Record) -> Result<Self> {
        rec.expect_tag("box-calibration")?;
        Ok(BoxCalibration {
            predictor: Predictor::from_record(rec.get_child("predictor")?)?,
            h: QuantileModel::from_record(rec.get_child("quantile")?)?,
            eta: rec.get_scalar("eta")?,
            alpha: rec.get_scalar("alpha")?,
            scores: rec.get_vector("scores")?,
            residual_range: rec.get_vector("residual_range")?,
        })
    }
}

impl Persist for EllipsoidCalibration<Predictor> {
    fn to_record(&self) -> Record {
        Record::new("ellipsoid-calibration")
            .scalar("eta", self.eta)
            .scalar("alpha", self.alpha)
            .scalar("jitter", self.factor.jitter())
            .scalar("residual_range", self.residual_range)
            .vector("scores", &self.scores)
            .array("factor", self.factor.lower().clone())
            .child(self.predictor.to_record())
            .child(self.g.to_record())
    }

    fn from_record(rec: &Record) -> Result<Self> {
        rec.expect_tag("ellipsoid-calibration")?;
        let factor = PsdFactor::from_lower(rec.get_array("factor")?.clone())?.with_jitter(rec.get_scalar("jitter")?);
        Ok(EllipsoidCalibration {
            predictor: Predictor::from_record(rec.get_child("predictor")?)?,
            g: QuantileModel::from_record(rec.get_child("quantile")?)?,
            factor,
            eta: rec.get_scalar("eta")?,
            alpha: rec.get_scalar("alpha")?,
            scores: rec.get_vector("scores")?,
            residual_range: rec.get_scalar("residual_range")?,
        })
    }
}
