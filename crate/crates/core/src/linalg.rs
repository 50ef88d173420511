//! Dense row-major matrices, jittered Cholesky and Mahalanobis distances.

use crate::error::{check_dim, PtcError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("matrix data length", rows * cols, data.len())?;
        Ok(Matrix { rows, cols, data })
    }

    /// Build from row slices; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            check_dim(&format!("row {i} length"), cols, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.row_iter().map(|r| dot(r, x)).collect()
    }

    /// `selfᵀ x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &xi) in self.row_iter().zip(x) {
            if xi != 0.0 {
                axpy(xi, r, &mut out);
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_dim("matmul inner dimension", self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a != 0.0 {
                    axpy(a, other.row(k), orow);
                }
            }
        }
        Ok(out)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn frobenius_distance(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Lower Cholesky factor `L` with `L Lᵀ = Q + jitter·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdFactor {
    lower: Matrix,
    jitter: f64,
}

impl PsdFactor {
    pub fn identity(n: usize) -> Self {
        PsdFactor {
            lower: Matrix::identity(n),
            jitter: 0.0,
        }
    }

    /// Wrap an existing lower-triangular factor.
    pub fn from_lower(lower: Matrix) -> Result<Self> {
        check_dim("factor must be square", lower.rows(), lower.cols())?;
        for i in 0..lower.rows() {
            if !(lower[(i, i)] > 0.0) {
                return Err(PtcError::NotPsd { jitter: 0.0 });
            }
            for j in i + 1..lower.cols() {
                if lower[(i, j)] != 0.0 {
                    return Err(PtcError::DimensionMismatch(
                        "factor is not lower triangular".into(),
                    ));
                }
            }
        }
        Ok(PsdFactor { lower, jitter: 0.0 })
    }

    /// Record the jitter that was added before factorizing.
    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// Jitter added to the diagonal before factorizing.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// The factorized matrix `L Lᵀ`.
    pub fn matrix(&self) -> Matrix {
        let lt = self.lower.transpose();
        self.lower.matmul(&lt).expect("square factor")
    }

    /// `L⁻¹ r` by forward substitution.
    pub fn solve_lower(&self, r: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = self.lower.row(i);
            let s = r[i] - dot(&row[..i], &y[..i]);
            y[i] = s / row[i];
        }
        y
    }

    /// `L⁻ᵀ y` by back substitution.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lower[(k, i)] * x[k];
            }
            x[i] = s / self.lower[(i, i)];
        }
        x
    }

    /// `(L Lᵀ)⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `‖Lᵀ x‖₂ = √(xᵀ Q x)`.
    pub fn quad_norm(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for j in 0..n {
            // (Lᵀx)_j = Σ_{i≥j} L_ij x_i
            let mut v = 0.0;
            for i in j..n {
                v += self.lower[(i, j)] * x[i];
            }
            s += v * v;
        }
        s.sqrt()
    }
}

fn try_cholesky(q: &Matrix, shift: f64) -> Option<Matrix> {
    let n = q.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = q[(j, j)] + shift;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = q[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

pub const DEFAULT_JITTER_REL: f64 = 1e-8;
const MAX_JITTER_REL: f64 = 1e-2;

/// Cholesky factorization of `Q + λI` with `λ = jitter_rel·trace(Q)/n`,
/// escalating λ tenfold on breakdown up to `1e-2·trace(Q)/n`.
pub fn cholesky_jittered(q: &Matrix, jitter_rel: f64) -> Result<PsdFactor> {
    check_dim("cholesky expects a square matrix", q.rows(), q.cols())?;
    if !q.is_finite() {
        return Err(PtcError::NumericalBreakdown("non-finite matrix entry".into()));
    }
    let n = q.rows();
    if n == 0 {
        return Err(PtcError::DimensionMismatch("empty matrix".into()));
    }
    let asym = q.max_asymmetry();
    let mean_diag = q.trace() / n as f64;
    if asym > 1e-9 * mean_diag.abs().max(1.0) {
        return Err(PtcError::DimensionMismatch(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    let max_jitter = MAX_JITTER_REL * scale;
    let mut lambda = jitter_rel.max(0.0) * scale;
    loop {
        if let Some(lower) = try_cholesky(q, lambda) {
            return Ok(PsdFactor {
                lower,
                jitter: lambda,
            });
        }
        lambda = if lambda > 0.0 {
            lambda * 10.0
        } else {
            1e-12 * scale
        };
        if lambda > max_jitter * (1.0 + 1e-12) {
            return Err(PtcError::NotPsd { jitter: max_jitter });
        }
    }
}

/// `√(rᵀ (L Lᵀ)⁻¹ r)`.
pub fn mahalanobis(r: &[f64], factor: &PsdFactor) -> Result<f64> {
    check_dim("mahalanobis vector length", factor.dim(), r.len())?;
    Ok(norm2(&factor.solve_lower(r)))
}

/// Solve a symmetric positive definite system `M X = B` for several right-hand
/// sides given as the columns of `rhs` (row-major, rows = dim).
pub fn solve_spd(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    check_dim("spd system rows", m.rows(), rhs.rows())?;
    let factor = match try_cholesky(m, 0.0) {
        Some(l) => PsdFactor {
            lower: l,
            jitter: 0.0,
        },
        None => cholesky_jittered(m, 1e-12)
            .map_err(|_| PtcError::SingularSystem("system matrix is not positive definite".into()))?,
    };
    let mut out = Matrix::zeros(rhs.rows(), rhs.cols());
    for j in 0..rhs.cols() {
        let col = factor.solve(&rhs.column(j));
        for (i, v) in col.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    if !out.is_finite() {
        return Err(PtcError::SingularSystem("non-finite solution".into()));
    }
    Ok(out)
}

/// Sample mean and covariance (divisor `T-1`) of the rows of `x`.
pub fn mean_and_covariance(x: &Matrix) -> (Vec<f64>, Matrix) {
    let t = x.rows();
    let n = x.cols();
    let mut mean = vec![0.0; n];
    for r in x.row_iter() {
        axpy(1.0, r, &mut mean);
    }
    mean.iter_mut().for_each(|m| *m /= t.max(1) as f64);
    let mut cov = Matrix::zeros(n, n);
    for r in x.row_iter() {
        let d = sub(r, &mean);
        for i in 0..n {
            for j in 0..=i {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    let denom = if t > 1 { (t - 1) as f64 } else { 1.0 };
    for i in 0..n {
        for j in 0..=i {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_identity() {
        let f = cholesky_jittered(&Matrix::identity(3), DEFAULT_JITTER_REL).unwrap();
        assert!((f.jitter() - 1e-8).abs() < 1e-20);
        for i in 0..3 {
            assert!((f.lower()[(i, i)] - (1.0f64 + 1e-8).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn cholesky_two_by_two_exact() {
        let q = Matrix::from_rows(&[[4.0, 2.0], [2.0, 3.0]]).unwrap();
        let f = cholesky_jittered(&q, 0.0).unwrap();
        let l = f.lower();
        assert!((l[(0, 0)] - 2.0).abs() < 1e-9);
        assert!(l[(0, 1)].abs() < 1e-12);
        assert!((l[(1, 0)] - 1.0).abs() < 1e-9);
        assert!((l[(1, 1)] - 2f64.sqrt()).abs() < 1e-9);
        assert!(f.matrix().frobenius_distance(&q) < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let q = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky_jittered(&q, DEFAULT_JITTER_REL),
            Err(PtcError::NotPsd { .. })
        ));
    }

    #[test]
    fn cholesky_rescues_singular_psd() {
        let q = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let f = cholesky_jittered(&q, 0.0).unwrap();
        assert!(f.jitter() > 0.0 && f.jitter() <= 1e-2);
    }

    #[test]
    fn mahalanobis_examples() {
        let id = PsdFactor::identity(2);
        assert_eq!(mahalanobis(&[0.0, 0.0], &id).unwrap(), 0.0);
        assert!((mahalanobis(&[3.0, 4.0], &id).unwrap() - 5.0).abs() < 1e-12);
        let q = Matrix::from_rows(&[[4.0, 0.0], [0.0, 1.0]]).unwrap();
        let f = cholesky_jittered(&q, 0.0).unwrap();
        assert!((mahalanobis(&[2.0, 0.0], &f).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            mahalanobis(&[1.0], &f),
            Err(PtcError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn quad_norm_matches_matrix() {
        let q = Matrix::from_rows(&[[4.0, 1.0], [1.0, 3.0]]).unwrap();
        let f = cholesky_jittered(&q, 0.0).unwrap();
        let x = [0.3, -1.2];
        let direct = dot(&x, &q.matvec(&x)).sqrt();
        assert!((f.quad_norm(&x) - direct).abs() < 1e-12);
    }
}
