//! Special functions and quadrature underlying every marginal and predictive
//! formula.
//!
//! Everything here works in the log domain where it matters: per-trait score
//! totals and sample sizes in the thousands overflow `f64` otherwise.

mod integrals;
mod quadrature;

pub use integrals::{
    f_integral, gamma0, i_integral, i_integral_closed_form, i_integral_quadrature, i_tilde,
    integer_r, log_f_integral, IrkTable,
};
pub use quadrature::{adaptive_gauss_kronrod, gauss_laguerre, Quadrature, QuadratureRule};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
/// Below this argument `ln_gamma` shifts upward before applying Stirling's series.
const STIRLING_CUTOFF: f64 = 15.0;

/// Hyperparameters of the Stable transform-scaled process.
///
/// `alpha` is the Stable index, `c` the order of the polynomial tilt
/// (the tilt variable satisfies `Δ^{-α} ~ Gamma(c, θ)`), `theta` the CRM mass
/// and `r` the score dispersion shared by the Poisson and negative-binomial
/// score models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub c: f64,
    pub theta: f64,
    pub r: f64,
}

impl StableParams {
    pub fn new(alpha: f64, c: f64, theta: f64, r: f64) -> Result<Self> {
        let p = Self { alpha, c, theta, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        for (name, v) in [("c", self.c), ("theta", self.theta), ("r", self.r)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Stirling correction series `ln Γ(x) - [(x - ½) ln x - x + ½ ln 2π]` for `x >= 15`.
fn stirling_series(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0
        + inv2
            * (-1.0 / 360.0
                + inv2
                    * (1.0 / 1260.0
                        + inv2
                            * (-1.0 / 1680.0
                                + inv2
                                    * (1.0 / 1188.0
                                        + inv2 * (-691.0 / 360_360.0 + inv2 * (1.0 / 156.0)))))))
}

/// `ln Γ(x)` without argument checking. Returns NaN for `x <= 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    if x >= STIRLING_CUTOFF {
        return (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_series(x);
    }
    // Γ(x) = Γ(x + n) / (x (x+1) ... (x+n-1))
    let mut shifted = x;
    let mut prod = 1.0;
    while shifted < STIRLING_CUTOFF {
        prod *= shifted;
        shifted += 1.0;
    }
    ln_gamma(shifted) - prod.ln()
}

/// Natural log of the Gamma function.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma(x))
}

/// `ln Γ(a) - ln Γ(a + b)` for `a > 0`, `a + b > 0`, accurate when `a` is large
/// and `b` comparatively small (no catastrophic cancellation).
pub fn ln_gamma_diff(a: f64, b: f64) -> f64 {
    let s = a + b;
    if a >= STIRLING_CUTOFF && s >= STIRLING_CUTOFF {
        -(a - 0.5) * (b / a).ln_1p() - b * s.ln() + b + stirling_series(a) - stirling_series(s)
    } else {
        ln_gamma(a) - ln_gamma(s)
    }
}

/// `ln B(a, b)` without argument checking.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (big, small) = if a >= b { (a, b) } else { (b, a) };
    ln_gamma(small) + ln_gamma_diff(big, small)
}

/// Natural log of the Beta function `B(a, b) = Γ(a)Γ(b)/Γ(a+b)`.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::Domain(format!("log_beta requires a, b > 0, got ({a}, {b})")));
    }
    Ok(ln_beta(a, b))
}

/// `ln C(k + r - 1, k)` for real `r > 0`: the negative-binomial coefficient.
pub fn ln_nb_coef(k: f64, r: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    -ln_gamma_diff(r, k) - ln_gamma(k + 1.0)
}

/// `ln(1 - e^{-x})` for `x > 0`, stable at both ends.
#[inline]
pub fn ln_one_minus_exp_neg(x: f64) -> f64 {
    if x > std::f64::consts::LN_2 {
        (-(-x).exp()).ln_1p()
    } else {
        (-(-x).exp_m1()).ln()
    }
}

/// Numerically stable `ln Σ exp(v)`; `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_gamma_trivial_points() {
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert_eq!(log_gamma(2.0).unwrap(), 0.0);
        let half = log_gamma(0.5).unwrap();
        assert!((half - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-14);
        assert!((half - 0.572_364_942_924_700_1).abs() < 1e-14);
    }

    #[test]
    fn log_gamma_rejects_non_positive() {
        assert!(matches!(log_gamma(0.0), Err(Error::Domain(_))));
        assert!(matches!(log_gamma(-1.5), Err(Error::Domain(_))));
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn log_gamma_matches_factorials() {
        let mut lf = 0.0_f64;
        for n in 1..=170u32 {
            // ln Γ(n+1) = ln n!
            lf += (n as f64).ln();
            let v = ln_gamma(n as f64 + 1.0);
            assert!((v - lf).abs() <= 1e-12 * lf.abs().max(1.0), "n = {n}");
        }
    }

    #[test]
    fn log_beta_examples() {
        assert_eq!(log_beta(1.0, 1.0).unwrap(), 0.0);
        assert!((log_beta(0.5, 1.0).unwrap() - 2f64.ln()).abs() < 1e-14);
        assert!(matches!(log_beta(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(log_beta(1.0, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn ln_gamma_diff_matches_direct_difference() {
        for &(a, b) in &[(20.0, 0.3), (2501.0, 4.7), (1e5, 1.0), (3.0, 2.0), (16.0, 100.0)] {
            let direct = ln_gamma(a) - ln_gamma(a + b);
            let scale = ln_gamma(a).abs().max(1.0);
            assert!((ln_gamma_diff(a, b) - direct).abs() < 1e-13 * scale, "({a}, {b})");
        }
    }

    #[test]
    fn nb_coef_small_cases() {
        // C(4, 3) = 4 with r = 2, k = 3
        assert!((ln_nb_coef(3.0, 2.0) - 4f64.ln()).abs() < 1e-13);
        assert_eq!(ln_nb_coef(0.0, 7.5), 0.0);
        // r = 1: C(k, k) = 1
        assert!(ln_nb_coef(9.0, 1.0).abs() < 1e-13);
    }

    #[test]
    fn ln_one_minus_exp_neg_branches() {
        for &x in &[0.5_f64, 0.7, 1.0, 3.0] {
            let expect = (1.0 - (-x).exp()).ln();
            assert!((ln_one_minus_exp_neg(x) - expect).abs() < 1e-14 * expect.abs());
        }
        // ln(1 - y) = -y - y^2/2 - ... for y = e^{-x} tiny
        for &x in &[40.0_f64, 700.0] {
            let y = (-x).exp();
            let expect = -y - 0.5 * y * y;
            assert!((ln_one_minus_exp_neg(x) - expect).abs() <= 1e-15 * y);
        }
        // 1 - e^{-x} = x - x^2/2 + x^3/6 - ... for small x
        for &x in &[1e-300_f64, 1e-10, 1e-5] {
            let expect = (x - 0.5 * x * x + x * x * x / 6.0).ln();
            assert!((ln_one_minus_exp_neg(x) - expect).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn stable_params_domain() {
        assert!(StableParams::new(0.3, 60.0, 1.0, 10.0).is_ok());
        assert!(StableParams::new(1.0, 60.0, 1.0, 10.0).is_err());
        assert!(StableParams::new(0.3, 0.0, 1.0, 10.0).is_err());
        assert!(StableParams::new(0.3, 1.0, -1.0, 10.0).is_err());
        assert!(StableParams::new(0.3, 1.0, 1.0, f64::INFINITY).is_err());
    }
}
