//! Context-free and nearest-neighbour ellipsoid baselines.

use crate::error::{PtcError, Result};
use crate::linalg::{cholesky_jittered, mahalanobis, mean_and_covariance, sub, Matrix, DEFAULT_JITTER_REL};
use crate::uncertainty::UncertaintySet;

use super::metrics::var_rank;

/// Gaussian-shaped set ignoring `z`: sample mean, jittered sample covariance,
/// radius the `⌈αT⌉`-th smallest training Mahalanobis distance.
pub fn baseline_ellipsoid(c_train: &Matrix, alpha: f64) -> Result<UncertaintySet> {
    crate::error::check_alpha(alpha)?;
    let (t, n) = (c_train.rows(), c_train.cols());
    if t < n + 1 {
        return Err(PtcError::TooFewSamples { needed: n + 1, have: t });
    }
    let (mean, cov) = mean_and_covariance(c_train);
    let factor = cholesky_jittered(&cov, DEFAULT_JITTER_REL)?;
    let mut dist = c_train
        .row_iter()
        .map(|c| mahalanobis(&sub(c, &mean), &factor))
        .collect::<Result<Vec<_>>>()?;
    let k = var_rank(t, alpha) - 1;
    let (_, radius, _) = dist.select_nth_unstable_by(k, f64::total_cmp);
    UncertaintySet::new_ellipsoid(mean, factor, *radius)
}

/// Neighbour count `max{⌈√T⌉, 2n}`.
pub fn default_knn_k(t: usize, n: usize) -> usize {
    ((t as f64).sqrt().ceil() as usize).max(2 * n)
}

/// Ellipsoid fitted to the `k` training costs whose covariates are closest
/// to `z0`; ties in distance go to the lower row index. The radius is the
/// largest neighbour Mahalanobis distance, so every neighbour is covered.
/// No volume minimization is attempted.
pub fn baseline_knn(z_train: &Matrix, c_train: &Matrix, z0: &[f64], k: usize) -> Result<UncertaintySet> {
    crate::error::check_dim("query covariate", z_train.cols(), z0.len())?;
    let t = z_train.rows();
    if k == 0 || t < k {
        return Err(PtcError::TooFewSamples { needed: k.max(1), have: t });
    }
    let mut order: Vec<(f64, usize)> = z_train
        .row_iter()
        .enumerate()
        .map(|(i, z)| (z.iter().zip(z0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let idx: Vec<usize> = order[..k].iter().map(|p| p.1).collect();
    let nb = c_train.select_rows(&idx);
    let (mean, cov) = mean_and_covariance(&nb);
    let factor = cholesky_jittered(&cov, DEFAULT_JITTER_REL)?;
    let radius = nb
        .row_iter()
        .map(|c| mahalanobis(&sub(c, &mean), &factor))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    UncertaintySet::new_ellipsoid(mean, factor, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(t: usize, n: usize, seed: u64) -> Matrix {
        let mut rng = StreamKey::new(seed, "g").rng();
        let data = (0..t * n).map(|_| StandardNormal.sample(&mut rng)).collect();
        Matrix::from_vec(t, n, data).unwrap()
    }

    #[test]
    fn training_coverage_is_order_statistic() {
        let c = gaussian(101, 3, 1);
        for alpha in [0.5, 0.8, 0.93] {
            let set = baseline_ellipsoid(&c, alpha).unwrap();
            let covered = c.row_iter().filter(|r| set.contains(r).unwrap()).count();
            assert_eq!(covered, var_rank(101, alpha), "alpha={alpha}");
        }
        assert!(baseline_ellipsoid(&gaussian(3, 3, 0), 0.5).is_err());
    }

    #[test]
    fn knn_covers_neighbours_and_matches_global_fit() {
        let c = gaussian(40, 2, 2);
        let z = gaussian(40, 3, 3);
        let set = baseline_knn(&z, &c, &[0.0, 0.0, 0.0], 40).unwrap();
        assert!(c.row_iter().all(|r| set.contains(r).unwrap()));
        let global = baseline_ellipsoid(&c, 1.0 - 1e-12).unwrap();
        match (&set, &global) {
            (
                UncertaintySet::Ellipsoid { center: a, radius: ra, .. },
                UncertaintySet::Ellipsoid { center: b, radius: rb, .. },
            ) => {
                assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
                assert!((ra - rb).abs() < 1e-9);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn knn_ties_prefer_low_index() {
        let z = Matrix::from_rows(&[[1.0], [1.0], [1.0], [0.0]]).unwrap();
        let c = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [50.0, 50.0]]).unwrap();
        let set = baseline_knn(&z, &c, &[1.0], 3).unwrap();
        assert!(!set.contains(&[50.0, 50.0]).unwrap());
        assert_eq!(default_knn_k(1000, 40), 80);
        assert_eq!(default_knn_k(1000, 5), 32);
    }
}
