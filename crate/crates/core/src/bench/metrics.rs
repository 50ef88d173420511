use crate::error::{PtcError, Result};
use crate::linalg::{dot, Matrix};
use crate::problems::CostLaw;
use crate::rng::StreamKey;
use crate::uncertainty::UncertaintySet;

/// 1-based rank `⌈αm⌉` (clamped to `[1, m]`) of the lower order statistic.
pub fn var_rank(m: usize, alpha: f64) -> usize {
    ((alpha * m as f64 - 1e-9).ceil() as usize).clamp(1, m.max(1))
}

/// `⌈αm⌉`-th smallest of `costs`. The slice is reordered in place.
pub fn var_of_costs(costs: &mut [f64], alpha: f64) -> Result<f64> {
    if costs.is_empty() {
        return Err(PtcError::TooFewSamples { needed: 1, have: 0 });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(PtcError::ConfigInvalid(format!("alpha {alpha} must lie in (0, 1]")));
    }
    let k = var_rank(costs.len(), alpha) - 1;
    let (_, v, _) = costs.select_nth_unstable_by(k, f64::total_cmp);
    Ok(*v)
}

/// `m` objective vectors drawn from `c | z` on the stream `key`.
pub fn sample_costs(law: &CostLaw, z: &[f64], m: usize, key: StreamKey) -> Matrix {
    let mut rng = key.rng();
    let mut out = Matrix::zeros(m, law.cost_dim());
    for i in 0..m {
        out.row_mut(i).copy_from_slice(&law.sample_c(z, &mut rng));
    }
    out
}

/// VaR of `cᵀx` over pre-drawn cost samples.
pub fn var_from_samples(x: &[f64], samples: &Matrix, alpha: f64) -> Result<f64> {
    let mut costs: Vec<f64> = samples.row_iter().map(|c| dot(c, x)).collect();
    var_of_costs(&mut costs, alpha)
}

/// Monte Carlo `VaR_α[cᵀx | z]` from `m` conditional draws.
pub fn estimate_var(x: &[f64], z: &[f64], law: &CostLaw, alpha: f64, m: usize, key: StreamKey) -> Result<f64> {
    if m == 0 {
        return Err(PtcError::TooFewSamples { needed: 1, have: 0 });
    }
    var_from_samples(x, &sample_costs(law, z, m, key), alpha)
}

/// Fraction of `(z, c)` pairs with `c ∈ set_fn(z)`.
pub fn estimate_coverage<F>(set_fn: F, z: &Matrix, c: &Matrix) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Option<UncertaintySet>>,
{
    if z.rows() == 0 {
        return Err(PtcError::TooFewSamples { needed: 1, have: 0 });
    }
    let mut hits = 0usize;
    for (zi, ci) in z.row_iter().zip(c.row_iter()) {
        // `None` stands for the empty set.
        if let Some(set) = set_fn(zi)? {
            hits += set.contains(ci)? as usize;
        }
    }
    Ok(hits as f64 / z.rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn var_examples() {
        let mut c: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(var_of_costs(&mut c, 0.8).unwrap(), 8.0);
        assert_eq!(var_of_costs(&mut c, 1.0).unwrap(), 10.0);
        assert_eq!(var_of_costs(&mut c, 0.999).unwrap(), 10.0);
        assert_eq!(var_of_costs(&mut [2.5; 7], 0.3).unwrap(), 2.5);
        assert!(var_of_costs(&mut [], 0.5).is_err());
    }

    #[test]
    fn degenerate_sampler_gives_constant() {
        // x = 0 makes every cost exactly zero.
        let law = CostLaw::Toy { d: 1 };
        let v = estimate_var(&[0.0], &[0.2], &law, 0.9, 50, StreamKey::new(0, "v")).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn coverage_examples() {
        let z = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let c = Matrix::from_rows(&[[0.0], [1.0], [2.0], [9.0]]).unwrap();
        let all = estimate_coverage(|_| Ok(Some(UncertaintySet::universe(1))), &z, &c).unwrap();
        assert_eq!(all, 1.0);
        assert_eq!(estimate_coverage(|_| Ok(None), &z, &c).unwrap(), 0.0);
        let three = estimate_coverage(
            |_| Ok(Some(UncertaintySet::new_box(vec![-1.0], vec![5.0]).unwrap())),
            &z,
            &c,
        )
        .unwrap();
        assert_eq!(three, 0.75);
    }
}
