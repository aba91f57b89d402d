//! The `I(r, k)` family: `I(r, k) = ∫ (1 - e^{-rsk}) (1 - e^{-s})^{-1-α} e^{-s} ds`,
//! its one-step increment and the Poisson-score integral `F(n, q, r, α)`.

use super::{ln_one_minus_exp_neg, Quadrature};
use crate::error::{Error, Result};

/// Tolerance under which `r` is treated as an integer.
const INTEGER_R_TOL: f64 = 1e-9;

/// `Some(round(r))` when `r` is (numerically) a positive integer.
pub fn integer_r(r: f64) -> Option<u64> {
    let rounded = r.round();
    if rounded >= 1.0 && (r - rounded).abs() < INTEGER_R_TOL && rounded < 1e15 {
        Some(rounded as u64)
    } else {
        None
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("r must be positive, got {r}")))
    }
}

/// Sum of `B(1-α, i)` for `i` in `from+1 ..= to`, using
/// `B(1-α, i+1) = B(1-α, i) · i / (i + 1 - α)`.
fn beta_run(alpha: f64, from: u64, to: u64) -> f64 {
    if to <= from {
        return 0.0;
    }
    let start = from + 1;
    let mut term = super::ln_beta(1.0 - alpha, start as f64).exp();
    let mut sum = 0.0;
    let mut comp = 0.0; // Neumaier compensation
    for i in start..=to {
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        let fi = i as f64;
        term *= fi / (fi + 1.0 - alpha);
    }
    sum + comp
}

/// Closed form `I(r, k) = Σ_{i=1}^{rk} B(1-α, i)` for integer `r`.
pub fn i_integral_closed_form(r: u64, k: u64, alpha: f64) -> f64 {
    beta_run(alpha, 0, r * k)
}

/// `I(r, k)` by quadrature, valid for any real `r > 0`.
pub fn i_integral_quadrature(r: f64, k: u64, alpha: f64, quad: &Quadrature) -> Result<f64> {
    check_alpha(alpha)?;
    check_r(r)?;
    if k == 0 {
        return Ok(0.0);
    }
    let rk = r * k as f64;
    let log_f = |s: f64| ln_one_minus_exp_neg(rk * s) - (1.0 + alpha) * ln_one_minus_exp_neg(s) - s;
    Ok(quad.log_integral_half_line(log_f, -alpha)?.exp())
}

/// `I(r, k)`: closed form when `r` is an integer, quadrature otherwise.
pub fn i_integral(r: f64, k: u64, alpha: f64, quad: &Quadrature) -> Result<f64> {
    check_alpha(alpha)?;
    check_r(r)?;
    match integer_r(r) {
        Some(ri) => Ok(i_integral_closed_form(ri, k, alpha)),
        None => i_integral_quadrature(r, k, alpha, quad),
    }
}

/// One-step increment `I(r, n+1) - I(r, n)`.
///
/// For non-integer `r` it is integrated directly as
/// `∫ (1 - e^{-rs}) e^{-rsn} e^{-s} (1 - e^{-s})^{-1-α} ds` to avoid the
/// cancellation of differencing two large values.
pub fn i_tilde(r: f64, n: u64, alpha: f64, quad: &Quadrature) -> Result<f64> {
    check_alpha(alpha)?;
    check_r(r)?;
    if let Some(ri) = integer_r(r) {
        return Ok(beta_run(alpha, ri * n, ri * (n + 1)));
    }
    let rn = r * n as f64;
    let log_f = |s: f64| {
        ln_one_minus_exp_neg(r * s) - rn * s - s - (1.0 + alpha) * ln_one_minus_exp_neg(s)
    };
    Ok(quad.log_integral_half_line(log_f, -alpha)?.exp())
}

/// `ln F(n, q, r, α)` with `F = ∫ e^{-rsn} e^{-s} (1 - e^{-s})^{-1-α} (rs)^q ds`.
pub fn log_f_integral(n: u64, q: u64, r: f64, alpha: f64, quad: &Quadrature) -> Result<f64> {
    check_alpha(alpha)?;
    check_r(r)?;
    if q == 0 {
        return Err(Error::Divergent(
            "F(n, 0, r, alpha) diverges at the origin for alpha > 0".into(),
        ));
    }
    let qf = q as f64;
    let decay = r * n as f64 + 1.0;
    let ln_r = r.ln();
    let log_f = |s: f64| -decay * s - (1.0 + alpha) * ln_one_minus_exp_neg(s) + qf * (ln_r + s.ln());
    quad.log_integral_half_line(log_f, qf - 1.0 - alpha)
}

/// `F(n, q, r, α)`; may overflow for large `q`, prefer [`log_f_integral`].
pub fn f_integral(n: u64, q: u64, r: f64, alpha: f64, quad: &Quadrature) -> Result<f64> {
    Ok(log_f_integral(n, q, r, alpha, quad)?.exp())
}

/// `γ₀^{(n)} = α Σ_{i=1}^n B(1-α, i) = α I(1, n)`.
pub fn gamma0(n: u64, alpha: f64) -> f64 {
    alpha * beta_run(alpha, 0, n)
}

/// Incrementally extended table of `I(r, k)` for `k = 0, 1, 2, ...`.
#[derive(Debug, Clone)]
pub struct IrkTable {
    r: f64,
    alpha: f64,
    values: Vec<f64>,
}

impl IrkTable {
    pub fn new(r: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_r(r)?;
        Ok(Self { r, alpha, values: vec![0.0] })
    }

    /// `I(r, k)`, extending the table through `k` if needed.
    pub fn get(&mut self, k: u64, quad: &Quadrature) -> Result<f64> {
        let k = k as usize;
        while self.values.len() <= k {
            let last = self.values.len() - 1;
            let inc = i_tilde(self.r, last as u64, self.alpha, quad)?;
            self.values.push(self.values[last] + inc);
        }
        Ok(self.values[k])
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}
