//! Kernel-weighted conditional mean residual and the degenerate
//! distributionally robust LP over a Euclidean ball around it.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, PtcError, Result};
use crate::linalg::{axpy, norm2, Matrix};
use crate::predictors::PointModel;
use crate::robust::{solve_robust_with, Constraints, RobustProblem, RobustSolution};
use crate::uncertainty::UncertaintySet;
use crate::frank_wolfe::FwOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `1{max_i |u_i| ≤ R}`
    #[default]
    UniformBox,
    /// `exp(−‖u‖²/2)·1{max_i |u_i| ≤ R}`
    TruncatedGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub support_radius: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            kind: KernelKind::UniformBox,
            support_radius: 1.0,
        }
    }
}

impl KernelSpec {
    /// Kernel value at a (bandwidth-scaled) offset.
    pub fn eval(&self, u: &[f64]) -> f64 {
        let inside = u.iter().all(|v| v.abs() <= self.support_radius);
        if !inside {
            return 0.0;
        }
        match self.kind {
            KernelKind::UniformBox => 1.0,
            KernelKind::TruncatedGaussian => (-0.5 * u.iter().map(|v| v * v).sum::<f64>()).exp(),
        }
    }

    /// Positive lower bound `b_r` on the kernel over its support in `d` dimensions.
    pub fn lower_bound(&self, d: usize) -> f64 {
        match self.kind {
            KernelKind::UniformBox => 1.0,
            // attained at a corner of the support box
            KernelKind::TruncatedGaussian => (-0.5 * d as f64 * self.support_radius * self.support_radius).exp(),
        }
    }

    /// Upper bound `b_R`.
    pub fn upper_bound(&self) -> f64 {
        1.0
    }

    fn validate(&self) -> Result<()> {
        if !(self.support_radius > 0.0) || !self.support_radius.is_finite() {
            return Err(PtcError::ConfigInvalid(format!(
                "kernel support radius {} must be > 0",
                self.support_radius
            )));
        }
        Ok(())
    }
}

/// Normalized weights `w_t ∝ K((z_t − z₀)/h)`.
pub fn kernel_weights(z: &Matrix, z0: &[f64], spec: &KernelSpec, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(PtcError::ConfigInvalid(format!("bandwidth {h} must be > 0")));
    }
    spec.validate()?;
    check_dim("query covariate", z.cols(), z0.len())?;
    let mut u = vec![0.0; z0.len()];
    let mut w: Vec<f64> = z
        .row_iter()
        .map(|row| {
            for ((ui, a), b) in u.iter_mut().zip(row).zip(z0) {
                *ui = (a - b) / h;
            }
            spec.eval(&u)
        })
        .collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(PtcError::NoNeighbors);
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// `r₀ = Σ_t w_t r_t`.
pub fn dro_center(residuals: &Matrix, weights: &[f64]) -> Result<Vec<f64>> {
    check_dim("weights length", residuals.rows(), weights.len())?;
    let mut r0 = vec![0.0; residuals.cols()];
    for (row, w) in residuals.row_iter().zip(weights) {
        if *w != 0.0 {
            axpy(*w, row, &mut r0);
        }
    }
    Ok(r0)
}

/// `h = T^{−1/(2s+2d)}`.
pub fn default_bandwidth(t: usize, d: usize, s: f64) -> f64 {
    (t.max(1) as f64).powf(-1.0 / (2.0 * s + 2.0 * d as f64))
}

/// Plug-in radius `r̄·Ñ^{−1/2}·ln T`: `r̄` is the weighted standard deviation
/// of residual norms and `Ñ` the number of positively weighted samples.
/// Heuristic; the constants of the underlying rate are unknown.
pub fn default_epsilon(residuals: &Matrix, weights: &[f64], t: usize) -> Result<f64> {
    check_dim("weights length", residuals.rows(), weights.len())?;
    let norms: Vec<f64> = residuals.row_iter().map(norm2).collect();
    let mean: f64 = norms.iter().zip(weights).map(|(r, w)| r * w).sum();
    let var: f64 = norms.iter().zip(weights).map(|(r, w)| w * (r - mean) * (r - mean)).sum();
    let n_pos = weights.iter().filter(|w| **w > 0.0).count();
    if n_pos == 0 {
        return Err(PtcError::NoNeighbors);
    }
    Ok(var.max(0.0).sqrt() / (n_pos as f64).sqrt() * (t.max(1) as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DroConfig {
    /// Ambiguity radius; `None` selects [`default_epsilon`].
    pub epsilon: Option<f64>,
    /// Kernel bandwidth; `None` selects [`default_bandwidth`].
    pub bandwidth: Option<f64>,
    /// Smoothness order used by the bandwidth rule.
    pub smoothness: f64,
}

impl Default for DroConfig {
    fn default() -> Self {
        DroConfig {
            epsilon: None,
            bandwidth: None,
            smoothness: 1.0,
        }
    }
}

impl DroConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.epsilon {
            if !(e >= 0.0) || !e.is_finite() {
                return Err(PtcError::ConfigInvalid(format!("epsilon {e} must be >= 0")));
            }
        }
        if let Some(h) = self.bandwidth {
            if !(h > 0.0) || !h.is_finite() {
                return Err(PtcError::ConfigInvalid(format!("bandwidth {h} must be > 0")));
            }
        }
        if !(self.smoothness > 0.0) {
            return Err(PtcError::ConfigInvalid("smoothness must be > 0".into()));
        }
        Ok(())
    }

    pub fn bandwidth_for(&self, t: usize, d: usize) -> f64 {
        self.bandwidth.unwrap_or_else(|| default_bandwidth(t, d, self.smoothness))
    }
}

/// Residuals, kernel weights and ball parameters at `z0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DroBall {
    pub center: Vec<f64>,
    pub r0: Vec<f64>,
    pub epsilon: f64,
    pub bandwidth: f64,
}

/// Ball `{f̂(z₀) + r : ‖r − r₀‖ ≤ ε}` for a query covariate, given
/// precomputed validation residuals.
pub fn dro_ball<F: PointModel + ?Sized>(
    f: &F,
    z_val: &Matrix,
    residuals: &Matrix,
    z0: &[f64],
    config: &DroConfig,
    spec: &KernelSpec,
) -> Result<DroBall> {
    config.validate()?;
    let t = z_val.rows();
    let h = config.bandwidth_for(t, z_val.cols());
    let w = kernel_weights(z_val, z0, spec, h)?;
    let r0 = dro_center(residuals, &w)?;
    let epsilon = match config.epsilon {
        Some(e) => e,
        None => default_epsilon(residuals, &w, t)?,
    };
    let mut center = f.predict(z0)?;
    axpy(1.0, &r0, &mut center);
    Ok(DroBall {
        center,
        r0,
        epsilon,
        bandwidth: h,
    })
}

/// Solve `min_x max_{‖r−r₀‖≤ε} (f̂(z₀)+r)ᵀx`.
#[allow(clippy::too_many_arguments)]
pub fn solve_dro<F: PointModel + ?Sized>(
    f: &F,
    z_val: &Matrix,
    c_val: &Matrix,
    z0: &[f64],
    constraints: &Constraints,
    config: &DroConfig,
    spec: &KernelSpec,
) -> Result<RobustSolution> {
    let residuals = crate::calibrate::residuals(f, z_val, c_val)?;
    let ball = dro_ball(f, z_val, &residuals, z0, config, spec)?;
    let set = UncertaintySet::new_norm_ball(ball.center, ball.epsilon)?;
    solve_robust_with(&RobustProblem::new(set, constraints.clone())?, &FwOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::FnModel;

    #[test]
    fn uniform_weights_inside_window() {
        let z = Matrix::from_rows(&[[0.1], [0.2], [-0.3]]).unwrap();
        let w = kernel_weights(&z, &[0.0], &KernelSpec::default(), 1.0).unwrap();
        assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn outside_points_get_zero_weight() {
        let z = Matrix::from_rows(&[[0.1], [5.0]]).unwrap();
        assert_eq!(kernel_weights(&z, &[0.0], &KernelSpec::default(), 1.0).unwrap(), vec![1.0, 0.0]);
        let far = Matrix::from_rows(&[[3.0], [5.0]]).unwrap();
        assert!(matches!(
            kernel_weights(&far, &[0.0], &KernelSpec::default(), 1.0),
            Err(PtcError::NoNeighbors)
        ));
    }

    #[test]
    fn center_examples() {
        let r = Matrix::from_rows(&[[0.0], [4.0]]).unwrap();
        assert_eq!(dro_center(&r, &[0.25, 0.75]).unwrap(), vec![3.0]);
        assert_eq!(dro_center(&r, &[0.0, 1.0]).unwrap(), vec![4.0]);
        assert_eq!(dro_center(&r, &[0.5, 0.5]).unwrap(), vec![2.0]);
    }

    #[test]
    fn bandwidth_rule() {
        assert!((default_bandwidth(1024, 1, 1.0) - 0.176_776_695_296_636_9).abs() < 1e-12);
        assert_eq!(default_bandwidth(1, 3, 2.0), 1.0);
        assert!(default_bandwidth(2000, 1, 1.0) < default_bandwidth(1000, 1, 1.0));
        assert!(default_bandwidth(1000, 2, 1.0) > default_bandwidth(1000, 1, 1.0));
    }

    #[test]
    fn zero_radius_is_mean_shifted_lp() {
        let z = Matrix::from_rows(&[[0.0], [0.1], [0.2]]).unwrap();
        let c = Matrix::from_rows(&[[0.5], [0.1], [0.3]]).unwrap();
        let f = FnModel::new(1, 1, |_: &[f64]| vec![-0.1]);
        let cfg = DroConfig {
            epsilon: Some(0.0),
            bandwidth: Some(10.0),
            smoothness: 1.0,
        };
        let cons = Constraints::symmetric_box(1);
        let s = solve_dro(&f, &z, &c, &[0.1], &cons, &cfg, &KernelSpec::default()).unwrap();
        // center = f + mean residual = mean c = 0.3
        assert!((s.x[0] + 1.0).abs() < 1e-12);
        assert!((s.worst_case_value + 0.3).abs() < 1e-12);
    }

    #[test]
    fn huge_radius_is_conservative() {
        let z = Matrix::from_rows(&[[0.0], [0.1]]).unwrap();
        let c = Matrix::from_rows(&[[0.5], [0.4]]).unwrap();
        let f = FnModel::new(1, 1, |_: &[f64]| vec![0.0]);
        let cfg = DroConfig {
            epsilon: Some(100.0),
            bandwidth: Some(1.0),
            smoothness: 1.0,
        };
        let s = solve_dro(&f, &z, &c, &[0.0], &Constraints::symmetric_box(1), &cfg, &KernelSpec::default()).unwrap();
        assert!(s.x[0].abs() < 1e-9);
    }

    #[test]
    fn truncated_gaussian_is_bounded() {
        let k = KernelSpec {
            kind: KernelKind::TruncatedGaussian,
            support_radius: 1.0,
        };
        assert_eq!(k.eval(&[0.0]), 1.0);
        assert!(k.eval(&[0.9]) >= k.lower_bound(1));
        assert_eq!(k.eval(&[1.1]), 0.0);
    }
}
