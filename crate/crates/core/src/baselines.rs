//! Comparator priors: the gamma-process negative-binomial model (NB-Ga) and the
//! binary stable-Beta scaled process (SB-SP).
//!
//! NB-Ga places a CRM with Lévy intensity `θ s^{-1} e^{-s}` on trait rates and
//! draws negative binomial scores `C(a+r-1, a) (1-e^{-s})^a e^{-sr}`.

use serde::{Deserialize, Serialize};

use crate::distributions::{NegBinLaw, PoissonLaw};
use crate::error::{Error, Result};
use crate::special_math::{gamma0, ln_one_minus_exp_neg, Quadrature, StableParams};
use crate::stsp::{SuffStats, TraitDataset};

/// Parameters of the NB-Ga model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaProcParams {
    pub theta: f64,
    pub r: f64,
}

impl GammaProcParams {
    pub fn new(theta: f64, r: f64) -> Result<Self> {
        let p = GammaProcParams { theta, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::Domain(format!("theta must be positive, got {}", self.theta)));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::Domain(format!("r must be positive, got {}", self.r)));
        }
        Ok(())
    }
}

/// `ln J(n, q)` with `J(n, q) = ∫ e^{-srn} e^{-s} (1 - e^{-s})^q s^{-1} ds`.
pub fn log_j_integral(n: u64, q: u64, r: f64, quad: &Quadrature) -> Result<f64> {
    if q == 0 {
        return Err(Error::Divergent("NB-Ga trait integral diverges for a zero score total".into()));
    }
    if q == 1 {
        // Frullani: ∫ (e^{-s(rn+1)} - e^{-s(rn+2)}) / s ds
        let a = r * n as f64 + 1.0;
        return Ok((1.0 / a).ln_1p().ln());
    }
    let qf = q as f64;
    let decay = r * n as f64 + 1.0;
    let log_f = |s: f64| -decay * s + qf * ln_one_minus_exp_neg(s) - s.ln();
    quad.log_integral_half_line(log_f, qf - 1.0)
}

/// `θ ln(1 + nr)`: minus the log probability that `n` observations display
/// no trait.
pub fn nbga_log_void(n: u64, params: &GammaProcParams) -> f64 {
    params.theta * (params.r * n as f64).ln_1p()
}

/// Log marginal likelihood under NB-Ga:
/// `k ln θ − θ ln(1 + nr) + Σ_l [ln J(n, q_l) + Σ ln C(a+r−1, a)]`.
pub fn log_marginal_nbga(stats: &SuffStats, params: &GammaProcParams, quad: &Quadrature) -> Result<f64> {
    params.validate()?;
    let mut total = stats.k_n as f64 * params.theta.ln() - nbga_log_void(stats.n, params);
    for (q, count) in stats.q_hist() {
        total += count as f64 * log_j_integral(stats.n, q, params.r, quad)?;
    }
    Ok(total + stats.log_binom_sum_at(params.r))
}

/// Number of new traits in `m` further observations under NB-Ga:
/// `Poisson(θ ln((1 + (n+m) r) / (1 + nr)))`.
pub fn unseen_traits_law_nbga(n: u64, m: u64, params: &GammaProcParams) -> Result<PoissonLaw> {
    params.validate()?;
    let mean = params.theta * (m as f64 * params.r / (1.0 + n as f64 * params.r)).ln_1p();
    PoissonLaw::new(mean)
}

/// Number of new traits in `m` further observations under SB-SP:
/// `NegBin(k_n + c + 1, (θ + γ₀^{(n)}) / (θ + γ₀^{(n+m)}))`.
pub fn unseen_traits_law_sbsp(stats: &SuffStats, params: &StableParams, m: u64) -> Result<NegBinLaw> {
    params.validate()?;
    let theta = params.theta;
    let p = (theta + gamma0(stats.n, params.alpha)) / (theta + gamma0(stats.n + m, params.alpha));
    NegBinLaw::new(stats.k_n as f64 + params.c + 1.0, p.min(1.0))
}

/// Presence/absence version of a dataset.
pub fn binarize(data: &TraitDataset) -> TraitDataset {
    data.binarize()
}
