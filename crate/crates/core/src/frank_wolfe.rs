//! Conditional-gradient solver for `min cᵀx + w·√(xᵀQx)` over a polytope.
//!
//! The norm is smoothed to `√(xᵀQx + δ)` with `δ = 1e-9·trace(Q)/n` so the
//! gradient exists at `x = 0`. Iterates move along pairwise (toward/away)
//! directions over an explicit active set of polytope vertices, with an exact
//! line search on the smoothed objective. The linear minimization oracle is
//! the simplex method warm-started from the previous basis.
//!
//! On exit the candidates {last iterate, best iterate, active vertices} are
//! compared under the unsmoothed objective and the best is returned, which
//! recovers vertex optima (e.g. `x = 0`) exactly.

use crate::error::{check_dim, PtcError, Result};
use crate::linalg::{dot, Matrix, PsdFactor};
use crate::simplex::{solve_lp_simplex, LpProblem, LpSolution, LpStatus, PolytopeOracle};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwOptions {
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Compare the gap against `gap_tol·max(1, |objective|)` instead of `gap_tol`.
    pub relative_gap: bool,
}

impl Default for FwOptions {
    fn default() -> Self {
        FwOptions {
            gap_tol: 1e-6,
            max_iter: 5000,
            relative_gap: false,
        }
    }
}

/// Outcome of a conditional-gradient run.
#[derive(Debug, Clone)]
pub struct FwResult {
    pub x: Vec<f64>,
    /// Unsmoothed objective at `x`.
    pub value: f64,
    /// Final Frank-Wolfe duality gap of the smoothed objective.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Vertex {
    x: Vec<f64>,
    mx: Vec<f64>,
    weight: f64,
}

/// Objective `cᵀx + w·√(‖Mx‖² + δ)` over `{Ax = b, x ≥ 0}`.
pub(crate) struct LinPlusNorm<'a> {
    pub c: &'a [f64],
    pub m: &'a Matrix,
    pub weight: f64,
    pub delta: f64,
}

impl LinPlusNorm<'_> {
    fn value_from(&self, x: &[f64], mx: &[f64], delta: f64) -> f64 {
        dot(self.c, x) + self.weight * (dot(mx, mx) + delta).sqrt()
    }

    pub fn true_value(&self, x: &[f64]) -> f64 {
        let mx = self.m.matvec(x);
        self.value_from(x, &mx, 0.0)
    }
}

/// Smoothing constant for a norm matrix `M`: `1e-9·‖M‖_F²/rows(M)`.
pub(crate) fn smoothing_for(m: &Matrix) -> f64 {
    let fro2: f64 = m.as_slice().iter().map(|v| v * v).sum();
    let rows = m.rows().max(1) as f64;
    let d = 1e-9 * fro2 / rows;
    if d > 0.0 {
        d
    } else {
        1e-18
    }
}

fn line_search(lin_slope: f64, weight: f64, p: f64, q: f64, r: f64, gmax: f64) -> f64 {
    // φ'(γ) = lin_slope + w (pγ + q) / √(pγ² + 2qγ + r), increasing in γ.
    let deriv = |g: f64| {
        let s = (p * g * g + 2.0 * q * g + r).max(f64::MIN_POSITIVE).sqrt();
        lin_slope + weight * (p * g + q) / s
    };
    if deriv(gmax) <= 0.0 {
        return gmax;
    }
    if deriv(0.0) >= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, gmax);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-16 * gmax.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub(crate) fn minimize_lin_plus_norm(
    oracle: &mut PolytopeOracle,
    obj: &LinPlusNorm<'_>,
    opts: &FwOptions,
) -> Result<FwResult> {
    let n = oracle.dim();
    check_dim("objective length", n, obj.c.len())?;
    check_dim("norm matrix columns", n, obj.m.cols())?;
    let w = obj.weight;
    let delta = obj.delta;

    let start = oracle.minimize(obj.c)?;
    if start.status == LpStatus::Unbounded {
        return Err(PtcError::Unbounded);
    }
    if w == 0.0 {
        return Ok(FwResult {
            value: start.value,
            x: start.x,
            gap: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let mut active = vec![Vertex {
        mx: obj.m.matvec(&start.x),
        x: start.x.clone(),
        weight: 1.0,
    }];
    let mut x = start.x;
    let mut mx = active[0].mx.clone();
    let mut best_x = x.clone();
    let mut best_smooth = obj.value_from(&x, &mx, delta);
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let nrm = (dot(&mx, &mx) + delta).sqrt();
        let mut grad = obj.m.tr_matvec(&mx);
        for (g, c) in grad.iter_mut().zip(obj.c) {
            *g = c + w * *g / nrm;
        }
        let s = oracle.minimize(&grad)?;
        if s.status == LpStatus::Unbounded {
            return Err(PtcError::Unbounded);
        }
        let gx = dot(&grad, &x);
        gap = (gx - dot(&grad, &s.x)).max(0.0);
        let fval = obj.value_from(&x, &mx, delta);
        if fval < best_smooth {
            best_smooth = fval;
            best_x.clone_from(&x);
        }
        let tol = if opts.relative_gap {
            opts.gap_tol * fval.abs().max(1.0)
        } else {
            opts.gap_tol
        };
        if gap <= tol {
            converged = true;
            break;
        }
        iterations += 1;

        // Away vertex: active vertex with the largest gradient value.
        let (away, _) = active
            .iter()
            .enumerate()
            .map(|(i, v)| (i, dot(&grad, &v.x)))
            .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });

        let toward = match active
            .iter()
            .position(|v| v.x.iter().zip(&s.x).all(|(a, b)| (a - b).abs() <= 1e-9))
        {
            Some(i) => i,
            None => {
                active.push(Vertex {
                    mx: obj.m.matvec(&s.x),
                    x: s.x,
                    weight: 0.0,
                });
                active.len() - 1
            }
        };
        if toward == away {
            // Only possible when the gap is numerically zero.
            converged = true;
            break;
        }
        let d: Vec<f64> = active[toward]
            .x
            .iter()
            .zip(&active[away].x)
            .map(|(a, b)| a - b)
            .collect();
        let md: Vec<f64> = active[toward]
            .mx
            .iter()
            .zip(&active[away].mx)
            .map(|(a, b)| a - b)
            .collect();
        let gmax = active[away].weight;
        let step = line_search(
            dot(obj.c, &d),
            w,
            dot(&md, &md),
            dot(&mx, &md),
            dot(&mx, &mx) + delta,
            gmax,
        );
        if step <= 0.0 {
            // No progress possible along the pairwise direction.
            break;
        }
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += step * di;
        }
        for (mi, di) in mx.iter_mut().zip(&md) {
            *mi += step * di;
        }
        active[toward].weight += step;
        if step >= gmax {
            active.remove(away);
        } else {
            active[away].weight -= step;
        }
    }

    if obj.value_from(&x, &mx, delta) < best_smooth {
        best_x.clone_from(&x);
    }
    let mut out_x = best_x;
    let mut out_v = obj.true_value(&out_x);
    for v in &active {
        let val = obj.value_from(&v.x, &v.mx, 0.0);
        if val < out_v {
            out_v = val;
            out_x.clone_from(&v.x);
        }
    }
    let last_true = obj.true_value(&x);
    if last_true < out_v {
        out_x = x;
    }
    for xi in out_x.iter_mut() {
        if *xi < 0.0 {
            *xi = 0.0;
        }
    }
    Ok(FwResult {
        value: obj.true_value(&out_x),
        x: out_x,
        gap,
        iterations,
        converged,
    })
}

/// The objective is nondifferentiable only on `{Mx = 0}`, where smoothing
/// shifts the minimizer slightly. When the iterate lands near that set, the
/// LP over `{Ax = b, Mx = 0, x ≥ 0}` supplies an exact candidate.
pub(crate) fn kink_polish(a: &Matrix, b: &[f64], obj: &LinPlusNorm<'_>, mut res: FwResult) -> Result<FwResult> {
    let mx = obj.m.matvec(&res.x);
    if dot(&mx, &mx).sqrt() > 1e3 * obj.delta.sqrt() {
        return Ok(res);
    }
    let n = a.cols();
    let mut big = Matrix::zeros(a.rows() + obj.m.rows(), n);
    for i in 0..a.rows() {
        big.row_mut(i).copy_from_slice(a.row(i));
    }
    for i in 0..obj.m.rows() {
        big.row_mut(a.rows() + i).copy_from_slice(obj.m.row(i));
    }
    let mut rhs = b.to_vec();
    rhs.resize(big.rows(), 0.0);
    // The stacked system is often near rank-deficient; a breakdown just means no candidate.
    let sol = match solve_lp_simplex(&LpProblem::new(obj.c.to_vec(), big, rhs)?) {
        Ok(sol) => sol,
        Err(PtcError::NumericalBreakdown(_)) => return Ok(res),
        Err(e) => return Err(e),
    };
    if sol.status == LpStatus::Optimal {
        let mut x = sol.x;
        x.iter_mut().for_each(|v| *v = v.max(0.0));
        let v = obj.true_value(&x);
        if v <= res.value {
            res.x = x;
            res.value = v;
        }
    }
    Ok(res)
}

/// Minimize `cᵀx + weight·√(xᵀQx)` over `{Ax = b, x ≥ 0}`, `Q = L Lᵀ`.
///
/// `weight = 0` reduces to [`solve_lp_simplex`]. Infeasible or unbounded
/// polytopes are reported through the solution status, like the LP solver.
pub fn solve_lin_plus_norm(
    problem: &LpProblem,
    factor: &PsdFactor,
    weight: f64,
    opts: &FwOptions,
) -> Result<LpSolution> {
    problem.validate()?;
    check_dim("factor dimension", problem.n(), factor.dim())?;
    if !(weight >= 0.0) || !weight.is_finite() {
        return Err(PtcError::DomainError(format!(
            "weight must be finite and nonnegative, got {weight}"
        )));
    }
    if weight == 0.0 {
        return solve_lp_simplex(problem);
    }
    let mut oracle = match PolytopeOracle::new(&problem.a, &problem.b) {
        Ok(o) => o,
        Err(PtcError::Infeasible) => {
            return Ok(LpSolution {
                x: vec![0.0; problem.n()],
                value: f64::INFINITY,
                status: LpStatus::Infeasible,
            })
        }
        Err(e) => return Err(e),
    };
    let m = factor.lower().transpose();
    let obj = LinPlusNorm {
        c: &problem.c,
        m: &m,
        weight,
        delta: smoothing_for(&m),
    };
    let res = match minimize_lin_plus_norm(&mut oracle, &obj, opts) {
        Ok(r) => kink_polish(&problem.a, &problem.b, &obj, r)?,
        Err(PtcError::Unbounded) => {
            return Ok(LpSolution {
                x: vec![0.0; problem.n()],
                value: f64::NEG_INFINITY,
                status: LpStatus::Unbounded,
            })
        }
        Err(e) => return Err(e),
    };
    let sol = LpSolution {
        x: res.x,
        value: res.value,
        status: LpStatus::Optimal,
    };
    if !res.converged {
        return Err(PtcError::NotConverged {
            best: Box::new(sol),
            gap: res.gap,
            iterations: res.iterations,
        });
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex_2d(c: [f64; 2]) -> LpProblem {
        LpProblem::new(c.to_vec(), Matrix::from_rows(&[[1.0, 1.0]]).unwrap(), vec![1.0]).unwrap()
    }

    fn grid_oracle(c: [f64; 2], w: f64) -> f64 {
        let steps = 100_000;
        (0..=steps)
            .map(|i| {
                let t = i as f64 / steps as f64;
                c[0] * t + c[1] * (1.0 - t) + w * (t * t + (1.0 - t) * (1.0 - t)).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn zero_weight_matches_lp() {
        let p = simplex_2d([-1.0, -1.0]);
        let a = solve_lp_simplex(&p).unwrap();
        let b = solve_lin_plus_norm(&p, &PsdFactor::identity(2), 0.0, &FwOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pure_norm_is_centered() {
        let p = simplex_2d([0.0, 0.0]);
        let s = solve_lin_plus_norm(&p, &PsdFactor::identity(2), 1.0, &FwOptions::default()).unwrap();
        assert!((s.value - 0.5f64.sqrt()).abs() < 1e-4);
        assert!((s.x[0] - 0.5).abs() < 1e-3 && (s.x[1] - 0.5).abs() < 1e-3);
        assert!((grid_oracle([0.0, 0.0], 1.0) - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn small_weight_matches_grid() {
        let p = simplex_2d([-1.0, 0.0]);
        let s = solve_lin_plus_norm(&p, &PsdFactor::identity(2), 0.1, &FwOptions::default()).unwrap();
        assert!((s.value - grid_oracle([-1.0, 0.0], 0.1)).abs() < 1e-4);
    }

    #[test]
    fn negative_weight_rejected() {
        let p = simplex_2d([0.0, 0.0]);
        assert!(solve_lin_plus_norm(&p, &PsdFactor::identity(2), -1.0, &FwOptions::default()).is_err());
    }
}
