//! Forward simulators: the ST-SP restaurant process with negative binomial
//! scores, the Zipf benchmark generator and new-trait accounting.

use std::collections::{BTreeMap, HashSet};

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::distributions::{
    sample_h_new_trait, sample_pmf_adaptive, sample_score_given_rate, NegBinLaw, RngSeed, StspRng,
};
use crate::error::{Error, Result};
use crate::special_math::{IrkTable, Quadrature, StableParams};
use crate::stsp::{log_predictive_old_trait, ScoreKind, TraitDataset, TraitRecord, DEFAULT_GRID_START, DEFAULT_TAIL_TOL};

/// How scores of already opened traits are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub enum OldTraitSampler {
    #[default]
    /// Exact mixture: `Y ~ Beta(rn+1, q-α)` then `A ~ NegBin(r, Y)`, which
    /// reproduces the predictive pmf `C(k+r-1,k) B(r(n+1)+1, q+k-α) / B(rn+1, q-α)`.
    Mixture,
    /// Tabulate the predictive pmf on `{0..M}`, doubling `M` from 512 until the
    /// tail mass is below the tolerance, then draw from the table.
    Grid { grid_max: usize, tail_tol: f64 },
}


/// A dish (trait) opened by the restaurant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestaurantTrait {
    pub id: u64,
    /// Score total over the customers so far.
    pub q: u64,
    /// Number of customers that scored it.
    pub m: u64,
}

/// Sequential state of the negative binomial ST-SP restaurant process.
#[derive(Debug, Clone)]
pub struct RestaurantState {
    pub customers_served: u64,
    pub traits: Vec<RestaurantTrait>,
    params: StableParams,
    sampler: OldTraitSampler,
    irk: IrkTable,
    quad: Quadrature,
    rng: StspRng,
}

/// Scores of one customer: `(trait index, score)` pairs, including newly
/// opened traits, which are appended at the end of [`RestaurantState::traits`].
pub type Row = Vec<(usize, u64)>;

impl RestaurantState {
    pub fn new(params: StableParams, seed: RngSeed) -> Result<Self> {
        Self::with_options(params, seed.rng(), OldTraitSampler::default(), Quadrature::default())
    }

    pub fn with_options(
        params: StableParams,
        rng: StspRng,
        sampler: OldTraitSampler,
        quad: Quadrature,
    ) -> Result<Self> {
        params.validate()?;
        Ok(RestaurantState {
            customers_served: 0,
            traits: Vec::new(),
            irk: IrkTable::new(params.r, params.alpha)?,
            params,
            sampler,
            quad,
            rng,
        })
    }

    pub fn params(&self) -> &StableParams {
        &self.params
    }

    /// Serves the next customer.
    pub fn step(&mut self) -> Result<Row> {
        let n = self.customers_served;
        let StableParams { alpha, c, r, .. } = self.params;
        let mut row = Vec::new();
        if n > 0 {
            for idx in 0..self.traits.len() {
                let q = self.traits[idx].q;
                let a = sample_old_trait_score(q, n, &self.params, self.sampler, &mut self.rng)?;
                if a > 0 {
                    let t = &mut self.traits[idx];
                    t.q += a;
                    t.m += 1;
                    row.push((idx, a));
                }
            }
        }
        let i_n = self.irk.get(n, &self.quad)?;
        let i_next = self.irk.get(n + 1, &self.quad)?;
        let k_n = self.traits.len() as f64;
        let p = ((1.0 + alpha * i_n) / (1.0 + alpha * i_next)).min(1.0);
        let new = NegBinLaw::new(c + k_n, p)?.sample(&mut self.rng)?;
        for _ in 0..new {
            let h = sample_h_new_trait(n, &self.params, &mut self.rng)?;
            let a = sample_score_given_rate(h, r, &mut self.rng)?;
            let id = self.traits.len() as u64;
            self.traits.push(RestaurantTrait { id, q: a, m: 1 });
            row.push((self.traits.len() - 1, a));
        }
        self.customers_served += 1;
        Ok(row)
    }

    /// Serves `n` more customers, returning their rows.
    pub fn run(&mut self, n: u64) -> Result<Vec<Row>> {
        (0..n).map(|_| self.step()).collect()
    }
}

impl OldTraitSampler {
    /// The grid sampler with the default tolerance and a given size cap.
    pub fn grid(grid_max: usize) -> Self {
        OldTraitSampler::Grid { grid_max, tail_tol: DEFAULT_TAIL_TOL }
    }
}

/// Draws the score of an already opened trait with score total `q` for
/// customer `n + 1`, from `C(k+r-1,k) B(r(n+1)+1, q+k-α) / B(rn+1, q-α)`.
pub fn sample_old_trait_score<R: Rng + ?Sized>(
    q: u64,
    n: u64,
    params: &StableParams,
    sampler: OldTraitSampler,
    rng: &mut R,
) -> Result<u64> {
    let StableParams { alpha, r, .. } = *params;
    if q == 0 || n == 0 {
        return Err(Error::Domain(format!("old-trait score needs q >= 1 and n >= 1, got q={q}, n={n}")));
    }
    match sampler {
        OldTraitSampler::Mixture => {
            // (1 - Y) / Y = X₂ / X₁ with X₁ ~ Gamma(rn+1), X₂ ~ Gamma(q-α)
            let x1 = gamma_draw(r * n as f64 + 1.0, rng);
            let x2 = gamma_draw(q as f64 - alpha, rng);
            let lambda = gamma_draw(r, rng) * x2 / x1;
            if !(lambda > 0.0) {
                return Ok(0);
            }
            if !lambda.is_finite() || lambda > 1e18 {
                return Err(Error::Numerical(format!("predictive score rate overflow ({lambda})")));
            }
            Ok(Poisson::new(lambda)
                .map_err(|e| Error::Numerical(format!("poisson({lambda}): {e}")))?
                .sample(rng) as u64)
        }
        OldTraitSampler::Grid { grid_max, tail_tol } => {
            let k = sample_pmf_adaptive(
                |k| log_predictive_old_trait(q, n, k as u64, alpha, r),
                DEFAULT_GRID_START,
                grid_max,
                tail_tol,
                rng,
            )?;
            Ok(k as u64)
        }
    }
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0).expect("positive gamma shape").sample(rng)
}

/// Converts restaurant rows into a count dataset with trait ids `t{index}`.
pub fn rows_to_dataset(rows: &[Row], n_traits: usize) -> TraitDataset {
    let mut traits: Vec<TraitRecord> = (0..n_traits).map(|i| TraitRecord::new(format!("t{i}"))).collect();
    for (obs, row) in rows.iter().enumerate() {
        for &(idx, a) in row {
            traits[idx].entries.insert(obs, a as f64);
        }
    }
    traits.retain(|t| !t.entries.is_empty());
    TraitDataset { n_obs: rows.len(), traits, score_kind: ScoreKind::Count }
}

/// Simulates `n_total` observations from the negative binomial ST-SP model.
pub fn simulate_restaurant(n_total: u64, params: &StableParams, seed: RngSeed) -> Result<TraitDataset> {
    simulate_restaurant_with(n_total, params, seed.rng(), OldTraitSampler::default(), &Quadrature::default())
}

pub fn simulate_restaurant_with(
    n_total: u64,
    params: &StableParams,
    rng: StspRng,
    sampler: OldTraitSampler,
    quad: &Quadrature,
) -> Result<TraitDataset> {
    if n_total == 0 {
        return Err(Error::Domain("restaurant simulation needs at least one observation".into()));
    }
    let mut state = RestaurantState::with_options(*params, rng, sampler, quad.clone())?;
    let rows = state.run(n_total)?;
    Ok(rows_to_dataset(&rows, state.traits.len()))
}

/// Settings of the Zipf benchmark generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfConfig {
    pub xi: f64,
    pub r: f64,
    /// Hard truncation of the trait index. `None` simulates the untruncated
    /// model up to an index beyond which the expected number of displayed
    /// traits per observation is below `tail_tol`.
    pub k_max: Option<u64>,
    pub tail_tol: f64,
}

impl ZipfConfig {
    pub fn new(xi: f64, r: f64) -> Self {
        ZipfConfig { xi, r, k_max: None, tail_tol: 1e-6 }
    }

    /// Expected number of displayed traits per observation with index above `k`,
    /// bounded by `r Σ_{j>k} (1+j)^{-ξ} <= r (1+k)^{1-ξ} / (ξ-1)`.
    pub fn tail_bound(&self, k: u64) -> f64 {
        self.r * (1.0 + k as f64).powf(1.0 - self.xi) / (self.xi - 1.0)
    }

    /// Trait index at which the simulation stops.
    pub fn effective_k_max(&self) -> Result<u64> {
        if let Some(k) = self.k_max {
            return Ok(k);
        }
        if !(self.xi > 1.0) {
            return Err(Error::Config(format!(
                "Zipf exponent {} <= 1: the expected number of traits diverges; set k_max to truncate",
                self.xi
            )));
        }
        let k = ((self.r / (self.tail_tol * (self.xi - 1.0))).powf(1.0 / (self.xi - 1.0))).ceil();
        if k >= 1e18 {
            return Err(Error::Config(format!(
                "Zipf exponent {} needs more than 1e18 traits for tail {}; set k_max",
                self.xi, self.tail_tol
            )));
        }
        Ok(k as u64)
    }
}

/// Zipf success weights `q_k = (1+k)^{-ξ}`.
pub fn zipf_weight(k: u64, xi: f64) -> f64 {
    (1.0 + k as f64).powf(-xi)
}

/// Simulates `n_total` rows with `A_{i,k} ~ NegBin(r, 1 - q_k)` independently
/// over traits `k >= 1`, `q_k = (1+k)^{-ξ}`; zero scores are dropped.
///
/// Traits are visited block by block over `[2^j, 2^{j+1})`; within a block a
/// trait is proposed with the block's largest probability of being displayed
/// by any row and thinned to its own, so the cost scales with the number of
/// displayed traits rather than with `k_max`.
pub fn simulate_zipf(n_total: u64, config: &ZipfConfig, seed: RngSeed) -> Result<TraitDataset> {
    let ZipfConfig { xi, r, .. } = *config;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("r must be positive, got {r}")));
    }
    if !(xi > 1.0) {
        if config.k_max.is_none() {
            return Err(Error::Config(format!("Zipf exponent {xi} <= 1 needs an explicit k_max")));
        }
        warn!("Zipf exponent {xi} <= 1: trait count grows without bound, truncating at k_max");
    }
    let k_max = config.effective_k_max()?;
    let mut rng = seed.rng();
    let n = n_total as f64;
    let mut traits = Vec::new();
    let mut block_start = 1u64;
    while block_start <= k_max {
        let block_end = block_start.saturating_mul(2).min(k_max.saturating_add(1));
        // display probability over all rows, largest at the block start
        let p_any = |k: u64| -((r * n) * (-zipf_weight(k, xi)).ln_1p()).exp_m1();
        let bound = p_any(block_start);
        let mut k = block_start;
        loop {
            k = match k.checked_add(geometric_skip(bound, &mut rng)) {
                Some(v) => v,
                None => break,
            };
            if k >= block_end {
                break;
            }
            if rng.random::<f64>() * bound < p_any(k) {
                traits.push(zipf_trait(k, n_total, xi, r, &mut rng)?);
            }
            k += 1;
        }
        block_start = block_end;
    }
    Ok(TraitDataset { n_obs: n_total as usize, traits, score_kind: ScoreKind::Count })
}

/// Number of failures before the first success of a Bernoulli(`p`) sequence.
fn geometric_skip<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    if p <= 0.0 {
        return u64::MAX;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    let v = (u.ln() / (-p).ln_1p()).floor();
    if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        v as u64
    }
}

/// Rows of trait `k` conditioned on at least one nonzero score.
fn zipf_trait<R: Rng + ?Sized>(k: u64, n_total: u64, xi: f64, r: f64, rng: &mut R) -> Result<TraitRecord> {
    let qk = zipf_weight(k, xi);
    let s = -(-qk).ln_1p(); // success probability 1 - q_k = e^{-s}
    let per_row = -(r * (-qk).ln_1p()).exp_m1(); // 1 - (1 - q_k)^r
    let mut record = TraitRecord::new(format!("z{k}"));
    // first displaying row: geometric truncated to the n rows
    let u: f64 = rng.random();
    let all_miss = (n_total as f64 * (-per_row).ln_1p()).exp();
    let first = ((-(u * (1.0 - all_miss))).ln_1p() / (-per_row).ln_1p()).floor() as u64;
    let mut row = first.min(n_total - 1);
    loop {
        let a = sample_score_given_rate(s, r, rng)?;
        record.entries.insert(row as usize, a as f64);
        row = match row.checked_add(1 + geometric_skip(per_row, rng)) {
            Some(v) if v < n_total => v,
            _ => break,
        };
    }
    Ok(record)
}

/// Number of traits absent from `train` among the first `m` rows of
/// `stream`, for every `m` in `m_grid`.
pub fn new_trait_curve(train: &TraitDataset, stream: &TraitDataset, m_grid: &[u64]) -> Vec<(u64, u64)> {
    let seen: HashSet<&str> = train.traits.iter().map(|t| t.trait_id.as_str()).collect();
    let mut firsts: Vec<usize> = stream
        .traits
        .iter()
        .filter(|t| !seen.contains(t.trait_id.as_str()))
        .filter_map(|t| t.entries.keys().next().copied())
        .collect();
    firsts.sort_unstable();
    m_grid
        .iter()
        .map(|&m| (m, firsts.partition_point(|&i| (i as u64) < m) as u64))
        .collect()
}

/// Splits a dataset into its first `n` rows and the remaining rows, the
/// latter re-indexed from zero.
pub fn split_rows(data: &TraitDataset, n: usize) -> (TraitDataset, TraitDataset) {
    let train = data.prefix(n);
    let mut rest = Vec::new();
    for t in &data.traits {
        let entries: BTreeMap<usize, f64> = t.entries.range(n..).map(|(&i, &v)| (i - n, v)).collect();
        if !entries.is_empty() {
            rest.push(TraitRecord { trait_id: t.trait_id.clone(), entries, atom_param: t.atom_param });
        }
    }
    let stream = TraitDataset { n_obs: data.n_obs.saturating_sub(n), traits: rest, score_kind: data.score_kind };
    (train, stream)
}
