//! Dense two-phase primal simplex for standard-form LPs
//! `min cᵀx  s.t.  Ax = b, x ≥ 0`.
//!
//! Pivoting follows Bland's rule (lowest eligible index enters, ratio ties
//! leave by lowest basic index), so results are deterministic and the method
//! terminates on degenerate problems. The tableau is rebuilt from the original
//! data every [`REFACTOR_EVERY`] pivots to bound round-off drift.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, PtcError, Result};
use crate::linalg::{dot, Matrix};

pub const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const BREAKDOWN_TOL: f64 = 1e-12;
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl LpProblem {
    pub fn new(c: Vec<f64>, a: Matrix, b: Vec<f64>) -> Result<Self> {
        let p = LpProblem { c, a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn validate(&self) -> Result<()> {
        check_dim("objective length", self.a.cols(), self.c.len())?;
        check_dim("right-hand side length", self.a.rows(), self.b.len())?;
        if !self.a.is_finite()
            || !self.b.iter().all(|v| v.is_finite())
            || !self.c.iter().all(|v| v.is_finite())
        {
            return Err(PtcError::DomainError("LP data must be finite".into()));
        }
        Ok(())
    }

    /// Max-norm residual of `Ax = b`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.a
            .matvec(x)
            .iter()
            .zip(&self.b)
            .map(|(ax, b)| (ax - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub status: LpStatus,
}

impl LpSolution {
    fn non_optimal(n: usize, status: LpStatus) -> Self {
        let value = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        LpSolution {
            x: vec![0.0; n],
            value,
            status,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Simplex tableau in canonical form for the current basis.
#[derive(Debug, Clone)]
struct Tableau {
    /// Original constraint rows, sign-normalized so `b ≥ 0`, with any
    /// artificial columns appended.
    a0: Matrix,
    b0: Vec<f64>,
    /// `B⁻¹ a0` and `B⁻¹ b0`.
    t: Matrix,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    /// Columns allowed to enter the basis.
    eligible: usize,
    pivots_since_refactor: usize,
}

enum Phase2 {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let ncols = self.t.cols();
        let p = self.t[(r, col)];
        {
            let row = self.t.row_mut(r);
            for v in row.iter_mut() {
                *v /= p;
            }
        }
        self.rhs[r] /= p;
        let prow: Vec<f64> = self.t.row(r).to_vec();
        let prhs = self.rhs[r];
        for i in 0..self.t.rows() {
            if i == r {
                continue;
            }
            let f = self.t[(i, col)];
            if f != 0.0 {
                let row = self.t.row_mut(i);
                for j in 0..ncols {
                    row[j] -= f * prow[j];
                }
                row[col] = 0.0;
                self.rhs[i] -= f * prhs;
            }
        }
        self.basis[r] = col;
        self.pivots_since_refactor += 1;
    }

    /// Rebuild `B⁻¹[a0 | b0]` from scratch for the current basis.
    fn refactor(&mut self) -> Result<()> {
        let m = self.a0.rows();
        let mut t = self.a0.clone();
        let mut rhs = self.b0.clone();
        let mut assigned = vec![false; m];
        let mut new_basis = vec![usize::MAX; m];
        for &col in &self.basis {
            let mut best = None;
            let mut best_abs = 0.0;
            for i in 0..m {
                if !assigned[i] && t[(i, col)].abs() > best_abs {
                    best_abs = t[(i, col)].abs();
                    best = Some(i);
                }
            }
            let r = match best {
                Some(r) if best_abs > BREAKDOWN_TOL => r,
                _ => {
                    return Err(PtcError::NumericalBreakdown(format!(
                        "basis matrix singular at column {col}"
                    )))
                }
            };
            let p = t[(r, col)];
            t.row_mut(r).iter_mut().for_each(|v| *v /= p);
            rhs[r] /= p;
            let prow = t.row(r).to_vec();
            let prhs = rhs[r];
            for i in 0..m {
                if i != r {
                    let f = t[(i, col)];
                    if f != 0.0 {
                        let row = t.row_mut(i);
                        for (v, pv) in row.iter_mut().zip(&prow) {
                            *v -= f * pv;
                        }
                        row[col] = 0.0;
                        rhs[i] -= f * prhs;
                    }
                }
            }
            assigned[r] = true;
            new_basis[r] = col;
        }
        for v in rhs.iter_mut() {
            if *v < 0.0 && *v > -FEAS_TOL {
                *v = 0.0;
            }
        }
        self.t = t;
        self.rhs = rhs;
        self.basis = new_basis;
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = cost[..self.eligible].to_vec();
        for (i, &bi) in self.basis.iter().enumerate() {
            let cb = cost[bi];
            if cb != 0.0 {
                let row = self.t.row(i);
                for j in 0..self.eligible {
                    d[j] -= cb * row[j];
                }
            }
        }
        d
    }

    /// Bland-rule primal simplex from the current (feasible) basis.
    fn optimize(&mut self, cost: &[f64]) -> Result<Phase2> {
        let cscale = cost.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let opt_tol = 1e-9 * cscale;
        let m = self.t.rows();
        let max_pivots = 50_000 + 200 * (m + self.eligible);
        let mut pivots = 0usize;
        loop {
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let d = self.reduced_costs(cost);
            let entering = (0..self.eligible).find(|&j| d[j] < -opt_tol);
            let Some(col) = entering else {
                return Ok(Phase2::Optimal);
            };
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..m {
                let a = self.t[(i, col)];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            let tie = (ratio - best_ratio).abs() <= 1e-12 * best_ratio.abs().max(1.0);
                            if tie {
                                self.basis[i] < self.basis[l]
                            } else {
                                ratio < best_ratio
                            }
                        }
                    };
                    if better {
                        best_ratio = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return Ok(Phase2::Unbounded);
            };
            if self.t[(r, col)].abs() < BREAKDOWN_TOL {
                self.refactor()?;
                if self.t[(r, col)].abs() < BREAKDOWN_TOL {
                    return Err(PtcError::NumericalBreakdown(format!(
                        "pivot {:e} below threshold",
                        self.t[(r, col)]
                    )));
                }
            }
            self.pivot(r, col);
            pivots += 1;
            if pivots > max_pivots {
                return Err(PtcError::NumericalBreakdown(
                    "pivot limit exceeded (possible cycling)".into(),
                ));
            }
        }
    }

    fn primal(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (i, &bi) in self.basis.iter().enumerate() {
            if bi < n {
                x[bi] = self.rhs[i].max(0.0);
            }
        }
        x
    }
}

/// A polytope `{x ≥ 0 : Ax = b}` with a feasible basis already found, ready
/// to minimize any number of linear objectives. Each call starts from the
/// basis left by the previous one.
#[derive(Debug, Clone)]
pub struct PolytopeOracle {
    tab: Tableau,
    n: usize,
}

impl PolytopeOracle {
    /// Run phase one. Returns `Err(Infeasible)` when the polytope is empty.
    pub fn new(a: &Matrix, b: &[f64]) -> Result<Self> {
        check_dim("right-hand side length", a.rows(), b.len())?;
        let m = a.rows();
        let n = a.cols();
        let mut a0 = Matrix::zeros(m, n + m);
        let mut b0 = vec![0.0; m];
        for i in 0..m {
            let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n {
                a0[(i, j)] = sign * a[(i, j)];
            }
            a0[(i, n + i)] = 1.0;
            b0[i] = sign * b[i];
        }
        let mut tab = Tableau {
            t: a0.clone(),
            rhs: b0.clone(),
            a0,
            b0,
            basis: (n..n + m).collect(),
            eligible: n + m,
            pivots_since_refactor: 0,
        };
        let mut cost = vec![0.0; n + m];
        cost[n..].iter_mut().for_each(|c| *c = 1.0);
        tab.optimize(&cost)?;
        tab.refactor()?;
        let infeas: f64 = tab
            .basis
            .iter()
            .zip(&tab.rhs)
            .filter(|(&bi, _)| bi >= n)
            .map(|(_, &v)| v)
            .sum();
        let bscale = b.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        if infeas > FEAS_TOL * bscale {
            return Err(PtcError::Infeasible);
        }

        // Drive remaining (zero-level) artificials out of the basis; rows
        // where that is impossible are redundant and get dropped.
        let mut keep = vec![true; m];
        for r in 0..m {
            if tab.basis[r] < n {
                continue;
            }
            let col = (0..n).find(|&j| tab.t[(r, j)].abs() > PIVOT_TOL);
            match col {
                Some(j) => tab.pivot(r, j),
                None => keep[r] = false,
            }
        }
        let rows: Vec<usize> = (0..m).filter(|&i| keep[i]).collect();
        let strip = |mat: &Matrix| -> Matrix {
            let mut out = Matrix::zeros(rows.len(), n);
            for (k, &i) in rows.iter().enumerate() {
                out.row_mut(k).copy_from_slice(&mat.row(i)[..n]);
            }
            out
        };
        let tab = Tableau {
            a0: strip(&tab.a0),
            b0: rows.iter().map(|&i| tab.b0[i]).collect(),
            t: strip(&tab.t),
            rhs: rows.iter().map(|&i| tab.rhs[i]).collect(),
            basis: rows.iter().map(|&i| tab.basis[i]).collect(),
            eligible: n,
            pivots_since_refactor: tab.pivots_since_refactor,
        };
        let mut oracle = PolytopeOracle { tab, n };
        oracle.tab.refactor()?;
        Ok(oracle)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Minimize `cᵀx` over the polytope; status is `Optimal` or `Unbounded`.
    pub fn minimize(&mut self, c: &[f64]) -> Result<LpSolution> {
        check_dim("objective length", self.n, c.len())?;
        match self.tab.optimize(c)? {
            Phase2::Unbounded => Ok(LpSolution::non_optimal(self.n, LpStatus::Unbounded)),
            Phase2::Optimal => {
                if self.tab.pivots_since_refactor > 0 {
                    self.tab.refactor()?;
                }
                let x = self.tab.primal(self.n);
                let value = dot(c, &x);
                Ok(LpSolution {
                    x,
                    value,
                    status: LpStatus::Optimal,
                })
            }
        }
    }
}

/// Solve a standard-form LP from scratch.
pub fn solve_lp_simplex(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    match PolytopeOracle::new(&problem.a, &problem.b) {
        Ok(mut oracle) => oracle.minimize(&problem.c),
        Err(PtcError::Infeasible) => Ok(LpSolution::non_optimal(problem.n(), LpStatus::Infeasible)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: &[f64], a: &[&[f64]], b: &[f64]) -> LpProblem {
        LpProblem::new(c.to_vec(), Matrix::from_rows(a).unwrap(), b.to_vec()).unwrap()
    }

    #[test]
    fn symmetric_vertex_bland_tiebreak() {
        let s = solve_lp_simplex(&lp(&[-1.0, -1.0], &[&[1.0, 1.0]], &[1.0])).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value + 1.0).abs() < 1e-12);
        assert_eq!(s.x, vec![1.0, 0.0]);
    }

    #[test]
    fn negative_rhs_is_infeasible() {
        let s = solve_lp_simplex(&lp(&[1.0, 0.0], &[&[1.0, 1.0]], &[-1.0])).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn ray_is_unbounded() {
        let s = solve_lp_simplex(&lp(&[-1.0, 0.0], &[&[1.0, -1.0]], &[0.0])).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn handles_negative_rhs_rows() {
        // -x1 - x2 = -2 is x1 + x2 = 2
        let s = solve_lp_simplex(&lp(&[1.0, 2.0], &[&[-1.0, -1.0]], &[-2.0])).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let s = solve_lp_simplex(&lp(
            &[1.0, 1.0, 0.0],
            &[&[1.0, 0.0, 1.0], &[2.0, 0.0, 2.0], &[0.0, 1.0, 1.0]],
            &[1.0, 2.0, 1.0],
        ))
        .unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.value.abs() < 1e-12);
        assert_eq!(s.x, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = LpProblem {
            c: vec![1.0],
            a: Matrix::from_rows(&[[1.0, 1.0]]).unwrap(),
            b: vec![1.0],
        };
        assert!(matches!(
            solve_lp_simplex(&p),
            Err(PtcError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn oracle_reuses_feasible_basis() {
        let a = Matrix::from_rows(&[[1.0, 1.0, 1.0]]).unwrap();
        let mut o = PolytopeOracle::new(&a, &[1.0]).unwrap();
        for k in 0..3 {
            let mut c = vec![1.0; 3];
            c[k] = -1.0;
            let s = o.minimize(&c).unwrap();
            assert_eq!(s.x[k], 1.0);
        }
    }
}
