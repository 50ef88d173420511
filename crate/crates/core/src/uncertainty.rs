//! Concrete uncertainty sets for one covariate and their support functions.

use crate::error::{check_dim, PtcError, Result};
use crate::linalg::{dot, mahalanobis, norm2, PsdFactor};

/// Relative slack used by membership tests so that a sample whose score
/// equals η exactly is reported as covered despite round-off in the bounds.
const MEMBERSHIP_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `{c : √((c−center)ᵀ Q⁻¹ (c−center)) ≤ radius}` with `Q = L Lᵀ`.
    Ellipsoid { center: Vec<f64>, factor: PsdFactor, radius: f64 },
    NormBall { center: Vec<f64>, radius: f64 },
}

fn check_radius(radius: f64) -> Result<()> {
    if radius >= 0.0 {
        Ok(())
    } else {
        Err(PtcError::DomainError(format!("radius must be nonnegative, got {radius}")))
    }
}

impl UncertaintySet {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim("box bounds", lower.len(), upper.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(PtcError::DomainError("box requires lower <= upper".into()));
        }
        Ok(UncertaintySet::Box { lower, upper })
    }

    pub fn new_ellipsoid(center: Vec<f64>, factor: PsdFactor, radius: f64) -> Result<Self> {
        check_dim("ellipsoid factor", center.len(), factor.dim())?;
        check_radius(radius)?;
        Ok(UncertaintySet::Ellipsoid { center, factor, radius })
    }

    pub fn new_norm_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(UncertaintySet::NormBall { center, radius })
    }

    /// Whole space (every box bound infinite).
    pub fn universe(n: usize) -> Self {
        UncertaintySet::Box {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            UncertaintySet::Box { lower, .. } => lower.len(),
            UncertaintySet::Ellipsoid { center, .. } | UncertaintySet::NormBall { center, .. } => center.len(),
        }
    }

    /// Box midpoint or ellipsoid/ball center.
    pub fn center(&self) -> Vec<f64> {
        match self {
            UncertaintySet::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect(),
            UncertaintySet::Ellipsoid { center, .. } | UncertaintySet::NormBall { center, .. } => center.clone(),
        }
    }

    pub fn contains(&self, c: &[f64]) -> Result<bool> {
        check_dim("objective vector", self.dim(), c.len())?;
        Ok(match self {
            UncertaintySet::Box { lower, upper } => c.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| {
                let tol = MEMBERSHIP_RTOL * (1.0 + v.abs());
                *l - tol <= *v && *v <= *u + tol
            }),
            UncertaintySet::Ellipsoid { center, factor, radius } => {
                let r: Vec<f64> = c.iter().zip(center).map(|(a, b)| a - b).collect();
                mahalanobis(&r, factor)? <= radius * (1.0 + MEMBERSHIP_RTOL)
            }
            UncertaintySet::NormBall { center, radius } => {
                let r: Vec<f64> = c.iter().zip(center).map(|(a, b)| a - b).collect();
                norm2(&r) <= radius * (1.0 + MEMBERSHIP_RTOL)
            }
        })
    }

    /// Support function `max_{c∈U} cᵀx`.
    pub fn support(&self, x: &[f64]) -> Result<f64> {
        check_dim("decision vector", self.dim(), x.len())?;
        Ok(match self {
            UncertaintySet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .zip(x)
                .map(|((l, u), xi)| {
                    if *xi > 0.0 {
                        u * xi
                    } else if *xi < 0.0 {
                        l * xi
                    } else {
                        0.0
                    }
                })
                .sum(),
            UncertaintySet::Ellipsoid { center, factor, radius } => {
                dot(center, x) + if *radius > 0.0 { radius * factor.quad_norm(x) } else { 0.0 }
            }
            UncertaintySet::NormBall { center, radius } => {
                dot(center, x) + if *radius > 0.0 { radius * norm2(x) } else { 0.0 }
            }
        })
    }
}

/// `max_{c∈U} cᵀx`.
pub fn worst_case_objective(set: &UncertaintySet, x: &[f64]) -> Result<f64> {
    set.support(x)
}
