use rand::Rng as _;

use super::oracles::sign0;
use super::{CostLaw, ProblemInstance, ProblemKind};
use crate::error::{PtcError, Result};
use crate::rng::Rng;
use crate::robust::Constraints;

pub(super) fn sample_z(d: usize, rng: &mut Rng) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-0.5..=0.5)).collect()
}

pub(super) fn sample_c(z: &[f64], rng: &mut Rng) -> Vec<f64> {
    let eps: f64 = rng.random_range(-0.5..=0.5);
    vec![(sign0(z[0]) + eps) * z[0].abs().sqrt()]
}

/// One-dimensional LP `min c x` over `−1 ≤ x ≤ 1` with `d` covariates, of
/// which only the first affects `c`.
pub fn gen_toy(t: usize, d: usize, seed: u64) -> Result<ProblemInstance> {
    if t == 0 || d == 0 {
        return Err(PtcError::ConfigInvalid(format!("toy problem needs T >= 1 and d >= 1 (got T={t}, d={d})")));
    }
    let law = CostLaw::Toy { d };
    let (dataset, _) = law.generate(t, ProblemInstance::data_key(ProblemKind::Toy, seed));
    Ok(ProblemInstance {
        seed,
        dataset,
        law,
        constraints: vec![Constraints::symmetric_box(1)],
        knapsack_sets: Vec::new(),
        clamped_rows: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn costs_respect_range_and_sign() {
        let inst = gen_toy(2000, 3, 5).unwrap();
        let bound = 1.5 * 0.5f64.sqrt();
        for i in 0..inst.dataset.len() {
            let z1 = inst.dataset.z[(i, 0)];
            let c = inst.dataset.c[(i, 0)];
            assert!(c.abs() <= bound + 1e-15);
            if z1 != 0.0 {
                assert_eq!(c.signum(), z1.signum());
            }
            for j in 0..3 {
                assert!(inst.dataset.z[(i, j)].abs() <= 0.5);
            }
        }
    }

    #[test]
    fn same_seed_same_data() {
        assert_eq!(gen_toy(30, 2, 9).unwrap().dataset, gen_toy(30, 2, 9).unwrap().dataset);
        assert_ne!(gen_toy(30, 2, 9).unwrap().dataset, gen_toy(30, 2, 10).unwrap().dataset);
        assert!(gen_toy(0, 2, 1).is_err());
    }
}
