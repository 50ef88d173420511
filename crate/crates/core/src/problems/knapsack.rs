use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{bernoulli_theta, check_live_dims, CostLaw, ProblemInstance, ProblemKind};
use crate::error::{PtcError, Result};
use crate::linalg::Matrix;
use crate::rng::{Rng, StreamKey};
use crate::robust::Constraints;

/// Constraint sets drawn per seed.
pub const KNAPSACK_SETS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackSet {
    pub prices: Vec<f64>,
    pub budget: f64,
}

pub(super) fn sample_z(d: usize, rng: &mut Rng) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(0.0..=4.0)).collect()
}

pub(super) fn sample_c(theta: &Matrix, z: &[f64], rng: &mut Rng) -> Vec<f64> {
    theta
        .matvec(z)
        .into_iter()
        .map(|u| u * u * rng.random_range(0.8..=1.2))
        .collect()
}

/// Ten price/budget pairs: integer prices in `[1, 1000]`, budget uniform on
/// `[max p, 1ᵀp − u·max p]` with `u ~ U[0,1]`.
pub fn gen_knapsack_constraints(n: usize, seed: u64) -> Vec<KnapsackSet> {
    let key = StreamKey::new(seed, "knapsack/constraints");
    (0..KNAPSACK_SETS)
        .map(|j| {
            let mut rng = key.index(j as u64).rng();
            let prices: Vec<f64> = (0..n).map(|_| rng.random_range(1..=1000u32) as f64).collect();
            let max = prices.iter().cloned().fold(0.0, f64::max);
            let total: f64 = prices.iter().sum();
            let u: f64 = rng.random_range(0.0..=1.0);
            let hi = total - u * max;
            let budget = if hi > max { rng.random_range(max..=hi) } else { max };
            KnapsackSet { prices, budget }
        })
        .collect()
}

/// `{x ∈ [0,1]ⁿ : pᵀx ≤ B}` as `v = (x, s, s_B) ≥ 0` with `x + s = 1` and
/// `(p/B)ᵀx + s_B = 1`. The lift is `[−I; 0]`, so the LP minimizes `−cᵀx`
/// and the objective-space decision is `−x`.
pub fn knapsack_constraints(set: &KnapsackSet) -> Result<Constraints> {
    let n = set.prices.len();
    if !(set.budget > 0.0) {
        return Err(PtcError::DomainError(format!("budget {} must be positive", set.budget)));
    }
    let mut a = Matrix::zeros(n + 1, 2 * n + 1);
    for i in 0..n {
        a[(i, i)] = 1.0;
        a[(i, n + i)] = 1.0;
        a[(n, i)] = set.prices[i] / set.budget;
    }
    a[(n, 2 * n)] = 1.0;
    let mut lift = Matrix::zeros(2 * n + 1, n);
    for i in 0..n {
        lift[(i, i)] = -1.0;
    }
    Constraints::lifted(a, vec![1.0; n + 1], lift)
}

/// Fractional knapsack with `n` items and `d ≥ 3` covariates.
pub fn gen_knapsack(t: usize, d: usize, n: usize, seed: u64) -> Result<ProblemInstance> {
    check_live_dims(d)?;
    if n == 0 {
        return Err(PtcError::ConfigInvalid("knapsack needs n >= 1".into()));
    }
    let theta = bernoulli_theta(n, d, StreamKey::new(seed, "knapsack/theta"));
    let law = CostLaw::Knapsack { theta };
    let (dataset, _) = law.generate(t, ProblemInstance::data_key(ProblemKind::Knapsack, seed));
    let knapsack_sets = gen_knapsack_constraints(n, seed);
    let constraints = knapsack_sets.iter().map(knapsack_constraints).collect::<Result<Vec<_>>>()?;
    Ok(ProblemInstance {
        seed,
        dataset,
        law,
        constraints,
        knapsack_sets,
        clamped_rows: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robust::is_feasible;

    #[test]
    fn budget_law_and_utilities() {
        let inst = gen_knapsack(200, 5, 20, 3).unwrap();
        assert_eq!(inst.knapsack_sets.len(), KNAPSACK_SETS);
        assert_eq!(inst.constraints.len(), KNAPSACK_SETS);
        for s in &inst.knapsack_sets {
            let max = s.prices.iter().cloned().fold(0.0, f64::max);
            assert!(s.budget >= max);
            assert!(s.prices.iter().all(|p| p.fract() == 0.0 && (1.0..=1000.0).contains(p)));
        }
        assert!(inst.dataset.c.as_slice().iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn greedy_fractional_optimum_matches_lp() {
        let set = KnapsackSet {
            prices: vec![4.0, 3.0, 2.0],
            budget: 5.0,
        };
        let cons = knapsack_constraints(&set).unwrap();
        let sol = cons.solve_nominal(&[8.0, 3.0, 5.0]).unwrap();
        // Ratios 2, 1, 2.5: take item 3, then 3/4 of item 1.
        let x: Vec<f64> = sol.x.iter().map(|v| -v).collect();
        assert!((x[0] - 0.75).abs() < 1e-9 && x[1].abs() < 1e-9 && (x[2] - 1.0).abs() < 1e-9);
        assert!((sol.worst_case_value + 11.0).abs() < 1e-9);
        assert!(is_feasible(&cons, &sol.x_lp));
    }
}
