//! Robust counterparts `min_x max_{c∈U} cᵀx` over standard-form polytopes,
//! and the empirical CVaR linear program.
//!
//! A [`Constraints`] value stores a standard-form system `{A v = b, v ≥ 0}`
//! together with a lift matrix `E` (rows = LP variables, cols = objective
//! dimension). The LP cost for objective `c` is `E c`, so the decision seen by
//! the objective is `x = Eᵀ v` and the realized cost is `cᵀx`. Bounded or free
//! variables are handled this way: e.g. `−1 ≤ x ≤ 1` becomes
//! `x = x⁺ − x⁻` with slack rows `x⁺ + s₁ = 1`, `x⁻ + s₂ = 1`.

use std::sync::{Arc, OnceLock};

use crate::error::{check_alpha, check_dim, PtcError, Result};
use crate::frank_wolfe::{kink_polish, minimize_lin_plus_norm, smoothing_for, FwOptions, LinPlusNorm};
use crate::linalg::{dot, Matrix};
use crate::simplex::{LpProblem, LpSolution, LpStatus, PolytopeOracle, FEAS_TOL};
use crate::uncertainty::UncertaintySet;

/// Feasible region plus objective lift.
#[derive(Debug, Clone)]
pub struct Constraints {
    a: Matrix,
    b: Vec<f64>,
    lift: Option<Matrix>,
    oracle: Arc<OnceLock<std::result::Result<PolytopeOracle, PtcError>>>,
}

impl PartialEq for Constraints {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b && self.lift == other.lift
    }
}

impl Constraints {
    /// `{x : A x = b, x ≥ 0}` with the objective acting on `x` directly.
    pub fn standard(a: Matrix, b: Vec<f64>) -> Result<Self> {
        check_dim("right-hand side length", a.rows(), b.len())?;
        Ok(Constraints {
            a,
            b,
            lift: None,
            oracle: Arc::default(),
        })
    }

    /// Standard form in `v` with objective lift `E` (LP cost `E c`).
    pub fn lifted(a: Matrix, b: Vec<f64>, lift: Matrix) -> Result<Self> {
        check_dim("right-hand side length", a.rows(), b.len())?;
        check_dim("lift rows", a.cols(), lift.rows())?;
        Ok(Constraints {
            a,
            b,
            lift: Some(lift),
            oracle: Arc::default(),
        })
    }

    /// `{x : A x = b, 0 ≤ x ≤ u}` via slacks `x + s = u`.
    pub fn with_upper_bounds(a: Matrix, b: Vec<f64>, upper: &[f64]) -> Result<Self> {
        check_dim("right-hand side length", a.rows(), b.len())?;
        let n = a.cols();
        check_dim("upper bounds", n, upper.len())?;
        let m = a.rows();
        let mut big = Matrix::zeros(m + n, 2 * n);
        for i in 0..m {
            big.row_mut(i)[..n].copy_from_slice(a.row(i));
        }
        for i in 0..n {
            big[(m + i, i)] = 1.0;
            big[(m + i, n + i)] = 1.0;
        }
        let mut rhs = b;
        rhs.extend_from_slice(upper);
        let mut lift = Matrix::zeros(2 * n, n);
        for i in 0..n {
            lift[(i, i)] = 1.0;
        }
        Constraints::lifted(big, rhs, lift)
    }

    /// The box `−1 ≤ x_i ≤ 1` in `n` dimensions.
    pub fn symmetric_box(n: usize) -> Self {
        // v = (x⁺, x⁻, s⁺, s⁻)
        let mut a = Matrix::zeros(2 * n, 4 * n);
        for i in 0..n {
            a[(i, i)] = 1.0;
            a[(i, 2 * n + i)] = 1.0;
            a[(n + i, n + i)] = 1.0;
            a[(n + i, 3 * n + i)] = 1.0;
        }
        let mut lift = Matrix::zeros(4 * n, n);
        for i in 0..n {
            lift[(i, i)] = 1.0;
            lift[(n + i, i)] = -1.0;
        }
        Constraints::lifted(a, vec![1.0; 2 * n], lift).expect("consistent shapes")
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn lift(&self) -> Option<&Matrix> {
        self.lift.as_ref()
    }

    /// Number of LP variables.
    pub fn n_lp(&self) -> usize {
        self.a.cols()
    }

    /// Dimension of objective vectors `c`.
    pub fn n_obj(&self) -> usize {
        self.lift.as_ref().map_or(self.a.cols(), |e| e.cols())
    }

    /// `E c`.
    pub fn lp_cost(&self, c: &[f64]) -> Result<Vec<f64>> {
        check_dim("objective vector", self.n_obj(), c.len())?;
        Ok(match &self.lift {
            Some(e) => e.matvec(c),
            None => c.to_vec(),
        })
    }

    /// `Eᵀ v`.
    pub fn decision(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim("LP point", self.n_lp(), v.len())?;
        Ok(match &self.lift {
            Some(e) => e.tr_matvec(v),
            None => v.to_vec(),
        })
    }

    /// Plain LP `min (E c)ᵀ v`.
    pub fn lp(&self, c: &[f64]) -> Result<LpProblem> {
        LpProblem::new(self.lp_cost(c)?, self.a.clone(), self.b.clone())
    }

    /// Phase-one result shared by every solve on these constraints.
    fn oracle(&self) -> Result<PolytopeOracle> {
        self.oracle
            .get_or_init(|| PolytopeOracle::new(&self.a, &self.b))
            .clone()
    }

    /// Solve the plain LP for objective `c`; `x` is returned in objective
    /// coordinates.
    pub fn solve_nominal(&self, c: &[f64]) -> Result<RobustSolution> {
        let set = UncertaintySet::new_norm_ball(c.to_vec(), 0.0)?;
        solve_robust(&RobustProblem::new(set, self.clone())?)
    }
}

#[derive(Debug, Clone)]
pub struct RobustProblem {
    pub set: UncertaintySet,
    pub constraints: Constraints,
}

impl RobustProblem {
    pub fn new(set: UncertaintySet, constraints: Constraints) -> Result<Self> {
        check_dim("uncertainty set dimension", constraints.n_obj(), set.dim())?;
        Ok(RobustProblem { set, constraints })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustSolution {
    /// Decision in objective coordinates (`cᵀx` is the realized cost).
    pub x: Vec<f64>,
    /// Underlying standard-form LP point.
    pub x_lp: Vec<f64>,
    /// `max_{c∈U} cᵀx`.
    pub worst_case_value: f64,
    pub status: LpStatus,
}

fn status_error(status: LpStatus) -> PtcError {
    match status {
        LpStatus::Infeasible => PtcError::Infeasible,
        _ => PtcError::Unbounded,
    }
}

/// Box upper corner pushed through the lift by interval arithmetic.
fn lifted_upper_corner(cons: &Constraints, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    match &cons.lift {
        None => upper.to_vec(),
        Some(e) => e
            .row_iter()
            .map(|row| {
                row.iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(w, (l, u))| if *w > 0.0 { w * u } else if *w < 0.0 { w * l } else { 0.0 })
                    .sum()
            })
            .collect(),
    }
}

/// Solve the robust counterpart with default conditional-gradient options.
pub fn solve_robust(problem: &RobustProblem) -> Result<RobustSolution> {
    solve_robust_with(problem, &FwOptions::default())
}

pub fn solve_robust_with(problem: &RobustProblem, opts: &FwOptions) -> Result<RobustSolution> {
    let cons = &problem.constraints;
    let set = &problem.set;
    check_dim("uncertainty set dimension", cons.n_obj(), set.dim())?;
    let v = match set {
        UncertaintySet::Box { lower, upper } => {
            if lower.iter().chain(upper).any(|v| !v.is_finite()) {
                return Err(PtcError::DomainError("box bounds must be finite to solve".into()));
            }
            let cost = lifted_upper_corner(cons, lower, upper);
            let sol = cons.oracle()?.minimize(&cost)?;
            if sol.status != LpStatus::Optimal {
                return Err(status_error(sol.status));
            }
            sol.x
        }
        UncertaintySet::Ellipsoid { center, factor, radius } => {
            // ‖Lᵀ Eᵀ v‖
            let lt = factor.lower().transpose();
            let m = match &cons.lift {
                Some(e) => lt.matmul(&e.transpose())?,
                None => lt,
            };
            norm_counterpart(cons, center, &m, *radius, opts)?
        }
        UncertaintySet::NormBall { center, radius } => {
            let m = match &cons.lift {
                Some(e) => e.transpose(),
                None => Matrix::identity(cons.n_lp()),
            };
            norm_counterpart(cons, center, &m, *radius, opts)?
        }
    };
    let x = cons.decision(&v)?;
    Ok(RobustSolution {
        worst_case_value: set.support(&x)?,
        x,
        x_lp: v,
        status: LpStatus::Optimal,
    })
}

fn norm_counterpart(cons: &Constraints, center: &[f64], m: &Matrix, radius: f64, opts: &FwOptions) -> Result<Vec<f64>> {
    let c = cons.lp_cost(center)?;
    let mut oracle = cons.oracle()?;
    if radius == 0.0 {
        let sol = oracle.minimize(&c)?;
        if sol.status != LpStatus::Optimal {
            return Err(status_error(sol.status));
        }
        return Ok(sol.x);
    }
    let obj = LinPlusNorm {
        c: &c,
        m,
        weight: radius,
        delta: smoothing_for(m),
    };
    let res = kink_polish(&cons.a, &cons.b, &obj, minimize_lin_plus_norm(&mut oracle, &obj, opts)?)?;
    if !res.converged {
        return Err(PtcError::NotConverged {
            best: Box::new(LpSolution {
                value: res.value,
                x: res.x,
                status: LpStatus::Optimal,
            }),
            gap: res.gap,
            iterations: res.iterations,
        });
    }
    Ok(res.x)
}

/// Outcome of checking a realized objective against a robust solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Guarantee {
    pub covered: bool,
    pub cost_ok: bool,
}

pub fn check_guarantee(solution: &RobustSolution, set: &UncertaintySet, c_realized: &[f64]) -> Guarantee {
    let covered = set.contains(c_realized).unwrap_or(false);
    let cost_ok = c_realized.len() == solution.x.len()
        && dot(c_realized, &solution.x) <= solution.worst_case_value + 1e-9 * (1.0 + solution.worst_case_value.abs());
    Guarantee { covered, cost_ok }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvarSolution {
    /// Decision in objective coordinates.
    pub x: Vec<f64>,
    pub x_lp: Vec<f64>,
    pub gamma: f64,
    /// `γ + (1/(K(1−α))) Σ_k (c̃_kᵀx − γ)⁺` at the optimum.
    pub value: f64,
}

/// Rockafellar–Uryasev objective at a fixed `γ` for given scalar costs.
pub fn cvar_objective(costs: &[f64], gamma: f64, alpha: f64) -> f64 {
    let k = costs.len() as f64;
    gamma + costs.iter().map(|c| (c - gamma).max(0.0)).sum::<f64>() / (k * (1.0 - alpha))
}

/// `min_{x,γ} γ + (1/(K(1−α))) Σ_k (c̃_kᵀx − γ)⁺` over the constraint set,
/// linearized with `u_k ≥ c̃_kᵀx − γ`, `u_k ≥ 0`, `γ = γ⁺ − γ⁻`.
pub fn solve_cvar_lp(samples: &[Vec<f64>], alpha: f64, constraints: &Constraints) -> Result<CvarSolution> {
    check_alpha(alpha)?;
    if samples.is_empty() {
        return Err(PtcError::TooFewSamples { needed: 1, have: 0 });
    }
    let k = samples.len();
    let n = constraints.n_lp();
    let m = constraints.a.rows();
    // columns: v (n) | γ⁺ γ⁻ | u (k) | s (k)
    let cols = n + 2 + 2 * k;
    let mut a = Matrix::zeros(m + k, cols);
    for i in 0..m {
        a.row_mut(i)[..n].copy_from_slice(constraints.a.row(i));
    }
    let mut b = constraints.b.clone();
    for (j, s) in samples.iter().enumerate() {
        let lc = constraints.lp_cost(s)?;
        let row = a.row_mut(m + j);
        row[..n].copy_from_slice(&lc);
        row[n] = -1.0;
        row[n + 1] = 1.0;
        row[n + 2 + j] = -1.0;
        row[n + 2 + k + j] = 1.0;
        b.push(0.0);
    }
    let mut c = vec![0.0; cols];
    c[n] = 1.0;
    c[n + 1] = -1.0;
    let w = 1.0 / (k as f64 * (1.0 - alpha));
    c[n + 2..n + 2 + k].iter_mut().for_each(|v| *v = w);
    let sol = crate::simplex::solve_lp_simplex(&LpProblem::new(c, a, b)?)?;
    if sol.status != LpStatus::Optimal {
        return Err(status_error(sol.status));
    }
    let v = sol.x[..n].to_vec();
    let gamma = sol.x[n] - sol.x[n + 1];
    let x = constraints.decision(&v)?;
    Ok(CvarSolution {
        x,
        x_lp: v,
        gamma,
        value: sol.value,
    })
}

/// True when `v` satisfies the standard-form system within `FEAS_TOL` scaled.
pub fn is_feasible(constraints: &Constraints, v: &[f64]) -> bool {
    if v.len() != constraints.n_lp() || v.iter().any(|x| *x < -FEAS_TOL) {
        return false;
    }
    constraints
        .a
        .row_iter()
        .zip(&constraints.b)
        .all(|(row, bi)| (dot(row, v) - bi).abs() <= 1e-7 * (1.0 + bi.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::PsdFactor;

    fn toy_box(l: f64, u: f64) -> RobustSolution {
        let set = UncertaintySet::new_box(vec![l], vec![u]).unwrap();
        solve_robust(&RobustProblem::new(set, Constraints::symmetric_box(1)).unwrap()).unwrap()
    }

    #[test]
    fn toy_box_positive_interval_goes_negative() {
        let s = toy_box(0.2, 0.8);
        assert!((s.x[0] + 1.0).abs() < 1e-9);
        assert!((s.worst_case_value + 0.2).abs() < 1e-9);
    }

    #[test]
    fn toy_box_straddling_zero_is_conservative() {
        let s = toy_box(-0.3, 0.8);
        assert!(s.x[0].abs() < 1e-9);
        assert!(s.worst_case_value.abs() < 1e-9);
    }

    #[test]
    fn singleton_matches_plain_lp() {
        let cons = Constraints::standard(Matrix::from_rows(&[[1.0, 1.0, 1.0]]).unwrap(), vec![1.0]).unwrap();
        let c = vec![0.3, -0.2, 0.1];
        for set in [
            UncertaintySet::new_box(c.clone(), c.clone()).unwrap(),
            UncertaintySet::new_ellipsoid(c.clone(), PsdFactor::identity(3), 0.0).unwrap(),
            UncertaintySet::new_norm_ball(c.clone(), 0.0).unwrap(),
        ] {
            let s = solve_robust(&RobustProblem::new(set, cons.clone()).unwrap()).unwrap();
            assert!((s.worst_case_value + 0.2).abs() < 1e-12);
            assert_eq!(s.x, vec![0.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn large_ball_on_toy_gives_zero() {
        let set = UncertaintySet::new_norm_ball(vec![0.4], 10.0).unwrap();
        let s = solve_robust(&RobustProblem::new(set, Constraints::symmetric_box(1)).unwrap()).unwrap();
        assert!(s.x[0].abs() < 1e-9, "{:?}", s.x);
        assert!(s.worst_case_value.abs() < 1e-9);
    }

    #[test]
    fn small_ball_on_toy_keeps_sign() {
        let set = UncertaintySet::new_norm_ball(vec![0.4], 0.1).unwrap();
        let s = solve_robust(&RobustProblem::new(set, Constraints::symmetric_box(1)).unwrap()).unwrap();
        assert!((s.x[0] + 1.0).abs() < 1e-9);
        assert!((s.worst_case_value + 0.3).abs() < 1e-9);
    }

    #[test]
    fn upper_bounds_are_respected() {
        let cons = Constraints::with_upper_bounds(Matrix::zeros(0, 2), vec![], &[1.0, 2.0]).unwrap();
        let s = cons.solve_nominal(&[-1.0, -1.0]).unwrap();
        assert_eq!(s.x, vec![1.0, 2.0]);
        assert!(is_feasible(&cons, &s.x_lp));
    }

    #[test]
    fn cvar_singleton_feasible_set() {
        let cons = Constraints::standard(Matrix::from_rows(&[[1.0]]).unwrap(), vec![1.0]).unwrap();
        let s = solve_cvar_lp(&[vec![1.0], vec![3.0]], 0.5, &cons).unwrap();
        assert!((s.value - 3.0).abs() < 1e-9);
        assert!((cvar_objective(&[1.0, 3.0], s.gamma, 0.5) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn cvar_single_sample_is_plain_lp() {
        let cons = Constraints::symmetric_box(2);
        let c = vec![0.5, -2.0];
        let s = solve_cvar_lp(std::slice::from_ref(&c), 0.9, &cons).unwrap();
        let plain = cons.solve_nominal(&c).unwrap();
        assert!((s.value - plain.worst_case_value).abs() < 1e-9);
    }

    #[test]
    fn guarantee_center_is_covered() {
        let set = UncertaintySet::new_box(vec![0.2], vec![0.8]).unwrap();
        let sol = solve_robust(&RobustProblem::new(set.clone(), Constraints::symmetric_box(1)).unwrap()).unwrap();
        let g = check_guarantee(&sol, &set, &[0.5]);
        assert!(g.covered && g.cost_ok);
        let g = check_guarantee(&sol, &set, &[5.0]);
        assert!(!g.covered);
    }
}
