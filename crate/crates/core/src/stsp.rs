//! Trait allocation data, sufficient statistics and the exact posterior and
//! predictive quantities of the Stable ST-SP prior with `T(s) = -log(1 - s)`.
//!
//! Three score models share the same prior:
//! - negative binomial scores, `Pr(A = a | s) = C(a+r-1, a) (1-e^{-s})^a e^{-sr}`;
//! - Poisson scores with mean `rs`;
//! - Gaussian spike-and-slab scores, displayed with probability `1 - e^{-s}`
//!   and distributed as `N(η, 1/s)` when displayed.
//!
//! The tilt variable `ζ^{-α}` has a `Gamma(c, θ)` prior; θ cancels from every
//! marginal in this module.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::distributions::{GammaLaw, NegBinLaw};
use crate::error::{Error, Result};
use crate::special_math::{
    gamma0, i_integral, ln_beta, ln_gamma, ln_gamma_diff, ln_nb_coef, log_f_integral, Quadrature,
    StableParams,
};

/// How the stored scores of a [`TraitDataset`] are to be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Count,
    Binary,
    Real,
}

/// One trait and the observations that display it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitRecord {
    pub trait_id: String,
    /// Observation index to (nonzero) score.
    pub entries: BTreeMap<usize, f64>,
    /// Location `η` of the Gaussian slab; spike-and-slab model only.
    pub atom_param: Option<f64>,
}

impl TraitRecord {
    pub fn new(trait_id: impl Into<String>) -> Self {
        TraitRecord { trait_id: trait_id.into(), entries: BTreeMap::new(), atom_param: None }
    }

    /// Number of observations displaying the trait.
    pub fn occurrences(&self) -> u64 {
        self.entries.len() as u64
    }
}

/// Sparse observation-by-trait score matrix. Zero scores are implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitDataset {
    pub n_obs: usize,
    pub traits: Vec<TraitRecord>,
    pub score_kind: ScoreKind,
}

impl TraitDataset {
    pub fn new(n_obs: usize, score_kind: ScoreKind) -> Self {
        TraitDataset { n_obs, traits: Vec::new(), score_kind }
    }

    /// Builds a dataset from `(observation, trait id, score)` triples. Zero
    /// count or binary scores are dropped; repeated `(observation, trait)`
    /// pairs are summed.
    pub fn from_triples<I, S>(n_obs: usize, score_kind: ScoreKind, triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, S, f64)>,
        S: Into<String>,
    {
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut traits: Vec<TraitRecord> = Vec::new();
        for (obs, id, score) in triples {
            if score == 0.0 && score_kind != ScoreKind::Real {
                continue;
            }
            let id = id.into();
            let slot = *index.entry(id.clone()).or_insert_with(|| {
                traits.push(TraitRecord::new(id));
                traits.len() - 1
            });
            *traits[slot].entries.entry(obs).or_insert(0.0) += score;
        }
        let data = TraitDataset { n_obs, traits, score_kind };
        data.validate()?;
        Ok(data)
    }

    pub fn n_traits(&self) -> usize {
        self.traits.len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::with_capacity(self.traits.len());
        for t in &self.traits {
            if !ids.insert(t.trait_id.as_str()) {
                return Err(Error::Data(format!("duplicate trait id {:?}", t.trait_id)));
            }
            if t.entries.is_empty() {
                return Err(Error::Data(format!("trait {:?} has no entries", t.trait_id)));
            }
            for (&obs, &score) in &t.entries {
                if obs >= self.n_obs {
                    return Err(Error::Data(format!(
                        "trait {:?}: observation index {obs} out of range (n = {})",
                        t.trait_id, self.n_obs
                    )));
                }
                match self.score_kind {
                    ScoreKind::Count if !(score >= 1.0 && score.fract() == 0.0 && score < 9.0e15) => {
                        return Err(Error::Data(format!(
                            "trait {:?}: count score {score} is not a positive integer",
                            t.trait_id
                        )));
                    }
                    ScoreKind::Binary if score != 1.0 => {
                        return Err(Error::Data(format!(
                            "trait {:?}: binary score {score} is not 1",
                            t.trait_id
                        )));
                    }
                    ScoreKind::Real if !score.is_finite() => {
                        return Err(Error::Data(format!("trait {:?}: score {score} is not finite", t.trait_id)));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Presence/absence version of the dataset.
    pub fn binarize(&self) -> TraitDataset {
        let traits = self
            .traits
            .iter()
            .map(|t| TraitRecord {
                trait_id: t.trait_id.clone(),
                entries: t.entries.keys().map(|&i| (i, 1.0)).collect(),
                atom_param: None,
            })
            .collect();
        TraitDataset { n_obs: self.n_obs, traits, score_kind: ScoreKind::Binary }
    }

    /// The first `n` observations only; traits not displayed among them are dropped.
    pub fn prefix(&self, n: usize) -> TraitDataset {
        let traits = self
            .traits
            .iter()
            .filter_map(|t| {
                let entries: BTreeMap<usize, f64> = t.entries.range(..n).map(|(&i, &v)| (i, v)).collect();
                (!entries.is_empty()).then(|| TraitRecord {
                    trait_id: t.trait_id.clone(),
                    entries,
                    atom_param: t.atom_param,
                })
            })
            .collect();
        TraitDataset { n_obs: n.min(self.n_obs), traits, score_kind: self.score_kind }
    }
}

/// Sufficient statistics of a count (or binary) dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuffStats {
    pub n: u64,
    pub k_n: u64,
    /// Per-trait number of displaying observations `m_l`.
    pub m: Vec<u64>,
    /// Per-trait score totals `q_l`.
    pub q: Vec<u64>,
    /// Multiplicity of every individual score value across all entries.
    pub score_hist: BTreeMap<u64, u64>,
    /// `Σ log a!` over all entries.
    pub log_factorial_sum: f64,
    /// The `r` used for `log_binom_sum`.
    pub r: f64,
    /// `Σ log C(a+r-1, a)` over all entries.
    pub log_binom_sum: f64,
}

impl SuffStats {
    /// Statistics of `data` with the negative binomial coefficient sum at `r`.
    pub fn from_dataset(data: &TraitDataset, r: f64) -> Result<Self> {
        if data.score_kind == ScoreKind::Real {
            return Err(Error::ModelMismatch(
                "real-valued scores cannot be summarised by count statistics".into(),
            ));
        }
        data.validate()?;
        let mut m = Vec::with_capacity(data.traits.len());
        let mut q = Vec::with_capacity(data.traits.len());
        let mut score_hist = BTreeMap::new();
        for t in &data.traits {
            m.push(t.occurrences());
            let mut total = 0u64;
            for &v in t.entries.values() {
                let a = v as u64;
                total += a;
                *score_hist.entry(a).or_insert(0) += 1;
            }
            q.push(total);
        }
        let log_factorial_sum = score_hist.iter().map(|(&a, &c)| c as f64 * ln_gamma(a as f64 + 1.0)).sum();
        let mut stats = SuffStats {
            n: data.n_obs as u64,
            k_n: m.len() as u64,
            m,
            q,
            score_hist,
            log_factorial_sum,
            r,
            log_binom_sum: 0.0,
        };
        stats.set_r(r);
        Ok(stats)
    }

    /// Statistics of an empty sample of size `n`.
    pub fn empty(n: u64, r: f64) -> Self {
        SuffStats {
            n,
            k_n: 0,
            m: Vec::new(),
            q: Vec::new(),
            score_hist: BTreeMap::new(),
            log_factorial_sum: 0.0,
            r,
            log_binom_sum: 0.0,
        }
    }

    /// Recomputes the `r`-dependent coefficient sum.
    pub fn set_r(&mut self, r: f64) {
        self.r = r;
        self.log_binom_sum =
            self.score_hist.iter().map(|(&a, &c)| c as f64 * ln_nb_coef(a as f64, r)).sum();
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.set_r(r);
        self
    }

    /// `Σ log C(a+r-1, a)` at an arbitrary `r` without mutating.
    pub fn log_binom_sum_at(&self, r: f64) -> f64 {
        if r == self.r {
            return self.log_binom_sum;
        }
        self.score_hist.iter().map(|(&a, &c)| c as f64 * ln_nb_coef(a as f64, r)).sum()
    }

    /// Total number of nonzero entries.
    pub fn n_entries(&self) -> u64 {
        self.m.iter().sum()
    }

    /// Multiplicity of every per-trait score total.
    pub fn q_hist(&self) -> BTreeMap<u64, u64> {
        histogram(&self.q)
    }

    /// Multiplicity of every per-trait occurrence count.
    pub fn m_hist(&self) -> BTreeMap<u64, u64> {
        histogram(&self.m)
    }
}

fn histogram(values: &[u64]) -> BTreeMap<u64, u64> {
    let mut hist = BTreeMap::new();
    for &v in values {
        *hist.entry(v).or_insert(0) += 1;
    }
    hist
}

/// Shorthand for [`SuffStats::from_dataset`].
pub fn suff_stats(data: &TraitDataset, r: f64) -> Result<SuffStats> {
    SuffStats::from_dataset(data, r)
}

fn prior_terms(k_n: u64, alpha: f64, c: f64, ln_denominator: f64) -> f64 {
    let k = k_n as f64;
    -ln_gamma_diff(c, k) + k * alpha.ln() - (c + k) * ln_denominator
}

/// `ln(1 + α I(r, n))`.
pub fn ln_tilt_rate(n: u64, alpha: f64, r: f64, quad: &Quadrature) -> Result<f64> {
    Ok((alpha * i_integral(r, n, alpha, quad)?).ln_1p())
}

/// Log marginal likelihood under negative binomial scores:
/// `ln Γ(c+k)/Γ(c) + k ln α − (c+k) ln(1 + α I(r,n)) + Σ ln B(rn+1, q_l−α) + Σ ln C(a+r−1, a)`.
pub fn log_marginal_nb(stats: &SuffStats, params: &StableParams, quad: &Quadrature) -> Result<f64> {
    params.validate()?;
    let StableParams { alpha, c, r, .. } = *params;
    let mut total = prior_terms(stats.k_n, alpha, c, ln_tilt_rate(stats.n, alpha, r, quad)?);
    let a = r * stats.n as f64 + 1.0;
    for (q, count) in stats.q_hist() {
        total += count as f64 * ln_beta(a, q as f64 - alpha);
    }
    Ok(total + stats.log_binom_sum_at(r))
}

/// Log marginal likelihood under Poisson scores with mean `rs`.
pub fn log_marginal_poisson(stats: &SuffStats, params: &StableParams, quad: &Quadrature) -> Result<f64> {
    params.validate()?;
    let StableParams { alpha, c, r, .. } = *params;
    let mut total = prior_terms(stats.k_n, alpha, c, ln_tilt_rate(stats.n, alpha, r, quad)?);
    for (q, count) in stats.q_hist() {
        total += count as f64 * log_f_integral(stats.n, q, r, alpha, quad)?;
    }
    Ok(total - stats.log_factorial_sum)
}

/// `ln G(n, A_l, η_l, α)` for one spike-and-slab trait with `m` displayed
/// scores whose squared deviations from `η` sum to `ss`.
pub fn log_g_spike_slab(n: u64, m: u64, ss: f64, alpha: f64, quad: &Quadrature) -> Result<f64> {
    if m == 0 || m > n {
        return Err(Error::Domain(format!("spike-and-slab trait needs 1 <= m <= n, got m={m}, n={n}")));
    }
    let mf = m as f64;
    let decay = (n - m) as f64 + 1.0 + 0.5 * ss;
    let log_f = |s: f64| {
        -decay * s + (mf - 1.0 - alpha) * crate::special_math::ln_one_minus_exp_neg(s) + 0.5 * mf * s.ln()
    };
    let lead = mf - 1.0 - alpha + 0.5 * mf;
    let integral = quad.log_integral_half_line(log_f, lead)?;
    Ok(integral - 0.5 * mf * (2.0 * std::f64::consts::PI).ln())
}

/// Log marginal density under Gaussian spike-and-slab scores (`r = 1`).
pub fn log_marginal_spike_slab(data: &TraitDataset, params: &StableParams, quad: &Quadrature) -> Result<f64> {
    params.validate()?;
    if data.score_kind != ScoreKind::Real {
        return Err(Error::ModelMismatch("spike-and-slab marginal needs real-valued scores".into()));
    }
    data.validate()?;
    let n = data.n_obs as u64;
    let alpha = params.alpha;
    let mut total = prior_terms(data.traits.len() as u64, alpha, params.c, ln_tilt_rate(n, alpha, 1.0, quad)?);
    for t in &data.traits {
        let eta = t.atom_param.ok_or_else(|| {
            Error::Config(format!("trait {:?} has no slab location", t.trait_id))
        })?;
        let ss: f64 = t.entries.values().map(|y| (y - eta).powi(2)).sum();
        total += log_g_spike_slab(n, t.occurrences(), ss, alpha, quad)?;
    }
    Ok(total)
}

/// Posterior law of the tilt variable `ζ^{-α}` (negative binomial or Poisson
/// scores): `Gamma(c + k_n, θ (1 + α I(r, n)))`.
pub fn posterior_tilt(stats: &SuffStats, params: &StableParams, quad: &Quadrature) -> Result<GammaLaw> {
    params.validate()?;
    let rate = params.theta * (1.0 + params.alpha * i_integral(params.r, stats.n, params.alpha, quad)?);
    GammaLaw::new(params.c + stats.k_n as f64, rate)
}

/// Law of the number of new traits displayed by `m` further observations:
/// `NegBin(c + k_n, (1 + α I(r,n)) / (1 + α I(r,n+m)))`.
pub fn unseen_traits_law(stats: &SuffStats, params: &StableParams, m: u64, quad: &Quadrature) -> Result<NegBinLaw> {
    params.validate()?;
    let StableParams { alpha, c, r, .. } = *params;
    let i_n = i_integral(r, stats.n, alpha, quad)?;
    let i_nm = i_integral(r, stats.n + m, alpha, quad)?;
    let p = (1.0 + alpha * i_n) / (1.0 + alpha * i_nm);
    NegBinLaw::new(c + stats.k_n as f64, p.min(1.0))
}

/// `ln Pr(A_{n+1,l} = k | Z_{1:n})` for a trait with score total `q` after
/// `n` observations, negative binomial scores:
/// `C(k+r−1, k) B(r(n+1)+1, q+k−α) / B(rn+1, q−α)`.
pub fn log_predictive_old_trait(q: u64, n: u64, k: u64, alpha: f64, r: f64) -> f64 {
    let rn = r * n as f64;
    ln_nb_coef(k as f64, r) + ln_beta(rn + r + 1.0, q as f64 + k as f64 - alpha)
        - ln_beta(rn + 1.0, q as f64 - alpha)
}

/// Tabulated predictive pmf of an already displayed trait.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveTable {
    /// `ln Pr(A = k)` for `k = 0..=M`.
    pub logpmf: Vec<f64>,
    /// Probability mass beyond `M`.
    pub tail_mass: f64,
}

/// Smallest grid size the predictive pmf is tabulated on.
pub const DEFAULT_GRID_START: usize = 512;
/// Default tolerance on the probability mass beyond the grid.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Predictive pmf table of an already displayed trait on `{0..M}`, with `M`
/// doubled from [`DEFAULT_GRID_START`] until the mass beyond it is below
/// `tail_tol`. Fails if that needs more than `grid_max` points.
pub fn predictive_old_trait_pmf(
    q: u64,
    n: u64,
    params: &StableParams,
    grid_max: usize,
    tail_tol: f64,
) -> Result<PredictiveTable> {
    params.validate()?;
    if q == 0 || n == 0 {
        return Err(Error::Domain(format!("predictive pmf needs q >= 1 and n >= 1, got q={q}, n={n}")));
    }
    let (alpha, r) = (params.alpha, params.r);
    let rn = r * n as f64;
    // Pr(A = k+1) / Pr(A = k) = (k+r)/(k+1) · (q+k−α)/(r(n+1)+1+q+k−α)
    let mut logpmf = vec![log_predictive_old_trait(q, n, 0, alpha, r)];
    let mut mass = logpmf[0].exp();
    let mut comp = 0.0;
    let mut grid = DEFAULT_GRID_START.min(grid_max.max(1));
    loop {
        while logpmf.len() <= grid {
            let k = (logpmf.len() - 1) as f64;
            let b = q as f64 + k - alpha;
            let step = ((k + r) / (k + 1.0) * b / (rn + r + 1.0 + b)).ln();
            let next = logpmf[logpmf.len() - 1] + step;
            logpmf.push(next);
            let p = next.exp();
            let t = mass + p;
            comp += (mass - t) + p;
            mass = t;
        }
        let tail_mass = (1.0 - (mass + comp)).max(0.0);
        if tail_mass <= tail_tol {
            return Ok(PredictiveTable { logpmf, tail_mass });
        }
        if grid >= grid_max {
            return Err(Error::GridTruncation { tail: tail_mass, tol: tail_tol, grid_max });
        }
        grid = (grid * 2).min(grid_max);
    }
}

/// Log marginal likelihood of a binary dataset under the stable-Beta scaled
/// process with `Gamma(c + 1, θ)` mixing:
/// `α^k θ^{c+1} (θ+γ₀)^{−(k+c+1)} Γ(k+c+1)/Γ(c+1) Π B(m_l−α, n−m_l+1)`.
pub fn log_marginal_sbsp(stats: &SuffStats, params: &StableParams) -> Result<f64> {
    params.validate()?;
    let StableParams { alpha, c, theta, .. } = *params;
    let k = stats.k_n as f64;
    let g0 = gamma0(stats.n, alpha);
    let mut total = k * alpha.ln() + (c + 1.0) * theta.ln() - (k + c + 1.0) * (theta + g0).ln()
        - ln_gamma_diff(c + 1.0, k);
    for (m, count) in stats.m_hist() {
        if m == 0 || m > stats.n {
            return Err(Error::Data(format!("occurrence count {m} outside 1..={}", stats.n)));
        }
        total += count as f64 * ln_beta(m as f64 - alpha, (stats.n - m) as f64 + 1.0);
    }
    Ok(total)
}
