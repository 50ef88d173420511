//! Closed-form oracles for the two one-dimensional illustrations: how
//! prediction quality drives conservative (zero) decisions, and how a
//! context-poor set with exact coverage still yields conservative decisions.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::error::{PtcError, Result};
use crate::rng::Rng;
use crate::uncertainty::UncertaintySet;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation with reflection below 0.5).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const GAMMA_TOL: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 10_000;

/// Series `P(a,x) = e^{−x} x^a / Γ(a) · Σ x^n / (a(a+1)…(a+n))`.
pub fn gamma_p_series(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_TOL {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

/// Continued fraction for `Q(a,x) = 1 − P(a,x)` (modified Lentz).
pub fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_TOL {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized lower incomplete gamma `P(a,x) = γ(a,x)/Γ(a)`.
pub fn regularized_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_continued_fraction(a, x)
    }
}

/// `P(c ≤ 0 | z_{1:k})` when `c = Σ_{i≤d} z_i − d·ε`, all Exp(1), given
/// `f = Σ_{i≤k} z_i`.
pub fn prob_nonpositive_given(f: f64, k: usize, d: usize) -> f64 {
    let d_f = d as f64;
    (-f / d_f).exp() * (1.0 + 1.0 / d_f).powi(k as i32 - d as i32)
}

/// Robust decision with a perfectly calibrated set: `1` if `c ≤ 0` with
/// probability ≥ α, `−1` if `c ≥ 0` with probability ≥ α, else `0`.
pub fn prediction_toy_decision(f: f64, k: usize, d: usize, alpha: f64) -> i8 {
    let p_neg = prob_nonpositive_given(f, k, d);
    let p_pos = 1.0 - p_neg;
    if p_neg >= alpha {
        1
    } else if p_pos >= alpha {
        -1
    } else {
        0
    }
}

/// Probability that the robust decision is zero when the predictor sees
/// only `k` of the `d` exponential factors.
pub fn oracle_prob_zero(k: usize, d: usize, alpha: f64) -> Result<f64> {
    if k < 1 || k > d {
        return Err(PtcError::DomainError(format!("need 1 <= k <= d, got k={k}, d={d}")));
    }
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(PtcError::DomainError(format!("alpha {alpha} must lie in (0.5, 1)")));
    }
    let d_f = d as f64;
    let shift = (d_f - k as f64) * (1.0 + 1.0 / d_f).ln();
    let upper = (-d_f * ((1.0 - alpha).ln() + shift)).max(0.0);
    let lower = (-d_f * (alpha.ln() + shift)).max(0.0);
    let k_f = k as f64;
    let p = regularized_lower_gamma(k_f, upper) - regularized_lower_gamma(k_f, lower);
    Ok(p.clamp(0.0, 1.0))
}

/// One draw `(z, c)` from the exponential-factor model.
pub fn sample_prediction_toy(d: usize, rng: &mut Rng) -> (Vec<f64>, f64) {
    let z: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
    let eps: f64 = Exp1.sample(rng);
    let c = z.iter().sum::<f64>() - d as f64 * eps;
    (z, c)
}

/// Sign with `sign(0) = 0`.
pub fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One draw from `z ~ U[−1,1]`, `c = (sign(z) + ε)√|z|`, `ε ~ U[−0.5,0.5]`.
pub fn sample_calibration_toy(rng: &mut Rng) -> (f64, f64) {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let eps: f64 = rng.random_range(-0.5..=0.5);
    (z, (sign0(z) + eps) * z.abs().sqrt())
}

fn check_toy_args(z: f64, alpha: f64) -> Result<()> {
    if !(0.5..1.0).contains(&alpha) {
        return Err(PtcError::DomainError(format!("alpha {alpha} must lie in [0.5, 1)")));
    }
    if !(-1.0..=1.0).contains(&z) {
        return Err(PtcError::DomainError(format!("z {z} must lie in [-1, 1]")));
    }
    Ok(())
}

/// `(1 − √(2−2α))/2`.
fn toy_offset(alpha: f64) -> f64 {
    0.5 * (1.0 - (2.0 - 2.0 * alpha).sqrt())
}

/// Switching threshold `(3 − 2α − 2√(2−2α))/4`.
pub fn oracle_toy_threshold(alpha: f64) -> Result<f64> {
    check_toy_args(0.0, alpha)?;
    Ok((3.0 - 2.0 * alpha - 2.0 * (2.0 - 2.0 * alpha).sqrt()) / 4.0)
}

/// Half-line set `[√z − a, ∞)` for `z ≥ 0` and `(−∞, −√(−z) + a]` for `z < 0`.
pub fn oracle_toy_set(z: f64, alpha: f64) -> Result<UncertaintySet> {
    check_toy_args(z, alpha)?;
    let a = toy_offset(alpha);
    Ok(if z >= 0.0 {
        UncertaintySet::Box {
            lower: vec![z.sqrt() - a],
            upper: vec![f64::INFINITY],
        }
    } else {
        UncertaintySet::Box {
            lower: vec![f64::NEG_INFINITY],
            upper: vec![-(-z).sqrt() + a],
        }
    })
}

/// Robust decision induced by [`oracle_toy_set`].
pub fn oracle_toy_solution(z: f64, alpha: f64) -> Result<i8> {
    let t = oracle_toy_threshold(alpha)?;
    check_toy_args(z, alpha)?;
    Ok(if z >= t {
        -1
    } else if z <= -t {
        1
    } else {
        0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_at_integers() {
        let mut fact = 1.0f64;
        for n in 1..20 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12, "n={n}");
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn gamma_one_is_exponential_cdf() {
        for x in [0.0, 1e-8, 0.1, 0.5, 1.9, 2.0, 2.1, 5.0, 30.0] {
            let p = regularized_lower_gamma(1.0, x);
            assert!((p - (1.0 - (-x).exp())).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn crossover_is_continuous() {
        for a in [1.0, 2.0, 3.5, 8.0] {
            let x = a + 1.0;
            let s = gamma_p_series(a, x);
            let cf = 1.0 - gamma_q_continued_fraction(a, x);
            assert!((s - cf).abs() < 1e-9, "a={a}: {s} vs {cf}");
        }
    }

    #[test]
    fn prob_zero_hand_value() {
        assert!((oracle_prob_zero(1, 1, 0.8).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn prob_zero_is_probability() {
        for d in 1..6 {
            for k in 1..=d {
                for a in [0.55, 0.7, 0.95] {
                    let p = oracle_prob_zero(k, d, a).unwrap();
                    assert!((0.0..=1.0).contains(&p));
                }
            }
        }
        assert!(oracle_prob_zero(0, 3, 0.8).is_err());
        assert!(oracle_prob_zero(4, 3, 0.8).is_err());
        assert!(oracle_prob_zero(1, 3, 0.4).is_err());
    }

    #[test]
    fn toy_threshold_examples() {
        assert!(oracle_toy_threshold(0.5).unwrap().abs() < 1e-15);
        assert!((oracle_toy_threshold(0.875).unwrap() - 0.0625).abs() < 1e-15);
        assert_eq!(oracle_toy_solution(0.0, 0.5).unwrap(), -1);
        assert_eq!(oracle_toy_solution(-1e-9, 0.5).unwrap(), 1);
        assert_eq!(oracle_toy_solution(0.06, 0.875).unwrap(), 0);
        assert_eq!(oracle_toy_solution(-0.0625, 0.875).unwrap(), 1);
        assert!(oracle_toy_solution(2.0, 0.8).is_err());
        assert!(oracle_toy_set(0.3, 0.3).is_err());
    }

    #[test]
    fn sign_of_zero_is_zero() {
        assert_eq!(sign0(0.0), 0.0);
        assert_eq!(sign0(-0.0), 0.0);
        assert_eq!(sign0(-2.0), -1.0);
    }
}
