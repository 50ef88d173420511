use crate::error::{check_dim, Result};
use crate::linalg::{solve_spd, Matrix};

/// Affine model `z ↦ Wᵀz + b` with `W` of shape d×n.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    weights: Matrix,
    intercept: Vec<f64>,
}

impl LinearModel {
    pub fn new(weights: Matrix, intercept: Vec<f64>) -> Result<Self> {
        check_dim("intercept length", weights.cols(), intercept.len())?;
        Ok(LinearModel { weights, intercept })
    }

    /// Ridge regression with an unpenalized intercept: solves
    /// `(X̃ᵀX̃ + λD) W̃ = X̃ᵀC` with `X̃ = [Z, 1]` and `D = diag(1,…,1,0)`.
    pub fn fit_ridge(z: &Matrix, c: &Matrix, lambda: f64) -> Result<Self> {
        let (gram, rhs) = ridge_system(z, c, lambda);
        let sol = solve_spd(&gram, &rhs)?;
        let d = z.cols();
        let mut weights = Matrix::zeros(d, c.cols());
        for i in 0..d {
            weights.row_mut(i).copy_from_slice(sol.row(i));
        }
        Ok(LinearModel {
            weights,
            intercept: sol.row(d).to_vec(),
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn intercept(&self) -> &[f64] {
        &self.intercept
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn predict(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.intercept.clone();
        for (zi, row) in z.iter().zip(self.weights.row_iter()) {
            crate::linalg::axpy(*zi, row, &mut out);
        }
        out
    }
}

/// Normal-equation matrix and right-hand side for augmented ridge regression.
pub(crate) fn ridge_system(z: &Matrix, c: &Matrix, lambda: f64) -> (Matrix, Matrix) {
    let d = z.cols();
    let n = c.cols();
    let mut gram = Matrix::zeros(d + 1, d + 1);
    let mut rhs = Matrix::zeros(d + 1, n);
    let mut xt = vec![0.0; d + 1];
    for (zr, cr) in z.row_iter().zip(c.row_iter()) {
        xt[..d].copy_from_slice(zr);
        xt[d] = 1.0;
        for i in 0..=d {
            for j in 0..=i {
                gram[(i, j)] += xt[i] * xt[j];
            }
            crate::linalg::axpy(xt[i], cr, rhs.row_mut(i));
        }
    }
    for i in 0..=d {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }
    for i in 0..d {
        gram[(i, i)] += lambda;
    }
    (gram, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_equations_hold() {
        let z = Matrix::from_rows(&[[0.1, 2.0], [1.0, -1.0], [0.5, 0.3], [2.0, 1.0], [-1.0, 0.0]]).unwrap();
        let c = Matrix::from_rows(&[[1.0, 0.0], [2.0, 1.0], [0.3, -0.5], [4.0, 2.0], [-1.0, 1.0]]).unwrap();
        let lambda = 0.7;
        let m = LinearModel::fit_ridge(&z, &c, lambda).unwrap();
        let (gram, rhs) = ridge_system(&z, &c, lambda);
        for k in 0..2 {
            let mut w: Vec<f64> = m.weights().column(k);
            w.push(m.intercept()[k]);
            let lhs = gram.matvec(&w);
            for i in 0..3 {
                assert!((lhs[i] - rhs[(i, k)]).abs() < 1e-8);
            }
        }
    }
}
