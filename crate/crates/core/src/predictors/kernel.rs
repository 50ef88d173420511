use crate::error::{PtcError, Result};
use crate::linalg::{cholesky_jittered, Matrix};

/// Maximum number of rows used by the median-distance heuristic.
const MEDIAN_SUBSAMPLE: usize = 500;

/// Kernel ridge regression with an RBF kernel
/// `k(z, z') = exp(-‖z - z'‖² / (2σ²))` on mean-centered targets.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRidgeModel {
    train_z: Matrix,
    coef: Matrix,
    target_mean: Vec<f64>,
    bandwidth: f64,
    lambda: f64,
}

/// Median of pairwise Euclidean distances over (at most) the first 500 rows.
pub fn median_pairwise_distance(z: &Matrix) -> f64 {
    let t = z.rows().min(MEDIAN_SUBSAMPLE);
    let mut d = Vec::with_capacity(t * t.saturating_sub(1) / 2);
    for i in 0..t {
        for j in 0..i {
            d.push(sq_dist(z.row(i), z.row(j)).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(|a, b| a.total_cmp(b));
    let m = d.len();
    let med = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KernelRidgeModel {
    pub fn fit(z: &Matrix, c: &Matrix, lambda: f64, bandwidth: Option<f64>) -> Result<Self> {
        let t = z.rows();
        let sigma = bandwidth.unwrap_or_else(|| median_pairwise_distance(z));
        let inv = 1.0 / (2.0 * sigma * sigma);
        let mut k = Matrix::zeros(t, t);
        for i in 0..t {
            for j in 0..=i {
                let v = (-sq_dist(z.row(i), z.row(j)) * inv).exp();
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += lambda;
        }
        let n = c.cols();
        let mut mean = vec![0.0; n];
        for r in c.row_iter() {
            crate::linalg::axpy(1.0, r, &mut mean);
        }
        mean.iter_mut().for_each(|m| *m /= t as f64);

        let factor = cholesky_jittered(&k, 0.0)
            .map_err(|e| PtcError::SingularSystem(format!("kernel system: {e}")))?;
        let mut coef = Matrix::zeros(t, n);
        for j in 0..n {
            let col: Vec<f64> = (0..t).map(|i| c[(i, j)] - mean[j]).collect();
            let a = factor.solve(&col);
            for i in 0..t {
                coef[(i, j)] = a[i];
            }
        }
        if !coef.is_finite() {
            return Err(PtcError::SingularSystem("non-finite kernel coefficients".into()));
        }
        Ok(KernelRidgeModel {
            train_z: z.clone(),
            coef,
            target_mean: mean,
            bandwidth: sigma,
            lambda,
        })
    }

    pub(crate) fn from_parts(
        train_z: Matrix,
        coef: Matrix,
        target_mean: Vec<f64>,
        bandwidth: f64,
        lambda: f64,
    ) -> Result<Self> {
        crate::error::check_dim("kernel coefficient rows", train_z.rows(), coef.rows())?;
        crate::error::check_dim("kernel target mean", coef.cols(), target_mean.len())?;
        Ok(KernelRidgeModel {
            train_z,
            coef,
            target_mean,
            bandwidth,
            lambda,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn train_z(&self) -> &Matrix {
        &self.train_z
    }

    pub fn coef(&self) -> &Matrix {
        &self.coef
    }

    pub fn target_mean(&self) -> &[f64] {
        &self.target_mean
    }

    pub fn input_dim(&self) -> usize {
        self.train_z.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.coef.cols()
    }

    pub fn predict(&self, z: &[f64]) -> Vec<f64> {
        let inv = 1.0 / (2.0 * self.bandwidth * self.bandwidth);
        let mut out = self.target_mean.clone();
        for (zi, ci) in self.train_z.row_iter().zip(self.coef.row_iter()) {
            let k = (-sq_dist(zi, z) * inv).exp();
            crate::linalg::axpy(k, ci, &mut out);
        }
        out
    }
}
