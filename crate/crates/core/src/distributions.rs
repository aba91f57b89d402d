//! Parametric laws and the samplers used by the restaurant process.
//!
//! All randomness flows through [`StspRng`], a ChaCha8 stream cipher generator
//! seeded from a [`RngSeed`]. Given the same seed and stream id, every sampler
//! in this crate produces bit-identical output on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_math::{ln_gamma, ln_nb_coef, ln_one_minus_exp_neg, log_sum_exp, StableParams};

/// The pseudo-random generator used throughout: ChaCha with 8 rounds.
pub type StspRng = ChaCha8Rng;

/// Seed for a family of independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed { seed }
    }

    /// Stream 0 of this seed.
    pub fn rng(&self) -> StspRng {
        self.stream(0)
    }

    /// An independent stream: the ChaCha key is derived from the seed and the
    /// 64-bit nonce is set to `id`.
    pub fn stream(&self, id: u64) -> StspRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        RngSeed { seed }
    }
}

/// Negative binomial law with `Pr(X = k) = C(k+a-1, k) p^a (1-p)^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegBinLaw {
    pub size: f64,
    pub success_prob: f64,
}

impl NegBinLaw {
    pub fn new(size: f64, success_prob: f64) -> Result<Self> {
        let law = NegBinLaw { size, success_prob };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.size.is_finite() && self.size > 0.0) {
            return Err(Error::Domain(format!("negative binomial size must be positive, got {}", self.size)));
        }
        if !(self.success_prob > 0.0 && self.success_prob <= 1.0) {
            return Err(Error::Domain(format!(
                "negative binomial success probability must lie in (0, 1], got {}",
                self.success_prob
            )));
        }
        Ok(())
    }

    pub fn logpmf(&self, k: u64) -> f64 {
        let p = self.success_prob;
        if k == 0 {
            return self.size * p.ln();
        }
        if p >= 1.0 {
            return f64::NEG_INFINITY;
        }
        ln_nb_coef(k as f64, self.size) + self.size * p.ln() + k as f64 * (-p).ln_1p()
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.logpmf(k).exp()
    }

    pub fn mean(&self) -> f64 {
        self.size * (1.0 - self.success_prob) / self.success_prob
    }

    pub fn variance(&self) -> f64 {
        self.mean() / self.success_prob
    }

    pub fn mode(&self) -> u64 {
        if self.size <= 1.0 || self.success_prob >= 1.0 {
            return 0;
        }
        ((self.size - 1.0) * (1.0 - self.success_prob) / self.success_prob).floor() as u64
    }

    /// Smallest `k` with `Pr(X <= k) >= level`.
    pub fn quantile(&self, level: f64) -> u64 {
        let q = 1.0 - self.success_prob;
        let mode = self.mode();
        quantile_from_mode(mode, self.logpmf(mode), |k| (k as f64 + self.size) / (k as f64 + 1.0) * q, level)
    }

    /// Exact draw via the Gamma-Poisson mixture.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        self.validate()?;
        if self.success_prob >= 1.0 {
            return Ok(0);
        }
        let scale = (1.0 - self.success_prob) / self.success_prob;
        let lambda = sample_gamma_raw(self.size, rng) * scale;
        sample_poisson_raw(lambda, rng)
    }
}

/// Gamma law parameterised by shape and rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaLaw {
    pub shape: f64,
    pub rate: f64,
}

impl GammaLaw {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        let law = GammaLaw { shape, rate };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shape.is_finite() && self.shape > 0.0) {
            return Err(Error::Domain(format!("gamma shape must be positive, got {}", self.shape)));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::Domain(format!("gamma rate must be positive, got {}", self.rate)));
        }
        Ok(())
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) + (self.shape - 1.0) * x.ln() - self.rate * x
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.validate()?;
        Ok(sample_gamma_raw(self.shape, rng) / self.rate)
    }
}

/// Poisson law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonLaw {
    pub mean: f64,
}

impl PoissonLaw {
    pub fn new(mean: f64) -> Result<Self> {
        let law = PoissonLaw { mean };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean.is_finite() && self.mean >= 0.0) {
            return Err(Error::Domain(format!("poisson mean must be nonnegative, got {}", self.mean)));
        }
        Ok(())
    }

    pub fn logpmf(&self, k: u64) -> f64 {
        if self.mean == 0.0 {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        k as f64 * self.mean.ln() - self.mean - ln_gamma(k as f64 + 1.0)
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.logpmf(k).exp()
    }

    pub fn variance(&self) -> f64 {
        self.mean
    }

    /// Smallest `k` with `Pr(X <= k) >= level`.
    pub fn quantile(&self, level: f64) -> u64 {
        let mode = self.mean.floor() as u64;
        quantile_from_mode(mode, self.logpmf(mode), |k| self.mean / (k as f64 + 1.0), level)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        self.validate()?;
        sample_poisson_raw(self.mean, rng)
    }
}

// Relative size below which pmf terms are dropped from the running sums.
const QUANTILE_NEGLIGIBLE: f64 = 1e-20;

/// Quantile of a unimodal pmf on the integers from its mode, the log pmf at
/// the mode and the ratio `pmf(k+1) / pmf(k)`. Sums are scaled by the modal
/// mass so that no term underflows before it is negligible.
fn quantile_from_mode(mode: u64, log_mode: f64, ratio: impl Fn(u64) -> f64, level: f64) -> u64 {
    let scale = log_mode.exp();
    let mut below = vec![1.0];
    let mut t = 1.0;
    let mut k = mode;
    while k > 0 {
        t /= ratio(k - 1);
        if !(t > QUANTILE_NEGLIGIBLE) {
            break;
        }
        below.push(t);
        k -= 1;
    }
    let mut cdf = below.iter().rev().sum::<f64>() * scale;
    if cdf >= level {
        for (i, &term) in below.iter().enumerate() {
            let next = cdf - term * scale;
            if next < level || i + 1 == below.len() {
                return mode - i as u64;
            }
            cdf = next;
        }
        return mode + 1 - below.len() as u64;
    }
    let mut t = 1.0;
    let mut k = mode;
    loop {
        t *= ratio(k);
        k += 1;
        cdf += t * scale;
        if cdf >= level || !(t > QUANTILE_NEGLIGIBLE) || k == u64::MAX {
            return k;
        }
    }
}

pub fn sample_negbin<R: Rng + ?Sized>(law: &NegBinLaw, rng: &mut R) -> Result<u64> {
    law.sample(rng)
}

pub fn sample_gamma<R: Rng + ?Sized>(law: &GammaLaw, rng: &mut R) -> Result<f64> {
    law.sample(rng)
}

pub fn sample_poisson<R: Rng + ?Sized>(law: &PoissonLaw, rng: &mut R) -> Result<u64> {
    law.sample(rng)
}

/// Beta(a, b) draw as `X / (X + Y)` with independent Gamma variables.
pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
        return Err(Error::Domain(format!("beta parameters must be positive, got ({a}, {b})")));
    }
    let (ln_x, ln_y) = (sample_ln_gamma(a, rng), sample_ln_gamma(b, rng));
    Ok(1.0 / (1.0 + (ln_y - ln_x).exp()))
}

/// Marsaglia-Tsang draw from Gamma(shape, 1).
fn sample_gamma_raw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0).expect("validated gamma shape").sample(rng)
}

/// Logarithm of a Gamma(shape, 1) draw, accurate even when the draw itself
/// would underflow (`shape` far below one).
fn sample_ln_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        return sample_gamma_raw(shape, rng).ln();
    }
    // G(a) = G(a + 1) * U^{1/a}
    let u: f64 = 1.0 - rng.random::<f64>();
    sample_gamma_raw(shape + 1.0, rng).ln() + u.ln() / shape
}

fn sample_poisson_raw<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if lambda <= 0.0 {
        return Ok(0);
    }
    if lambda > 1e18 {
        let z: f64 = StandardNormal.sample(rng);
        return Ok((lambda + lambda.sqrt() * z).round().max(0.0) as u64);
    }
    let poisson = Poisson::new(lambda).map_err(|e| Error::Numerical(format!("poisson({lambda}): {e}")))?;
    Ok(poisson.sample(rng) as u64)
}

/// Draws the latent rate `H` of a trait first displayed by observation
/// `n + 1`, with density proportional to
/// `(1 - e^{-rs}) (1 - e^{-s})^{-1-alpha} e^{-s(rn+1)}`.
///
/// Works in `y = 1 - e^{-s}` where the target is dominated by a
/// `Beta(1 - alpha, rn + 1)` kernel; each proposal `Y` is accepted with
/// probability `(1 - (1-Y)^r) / (max(r, 1) Y)`.
pub fn sample_h_new_trait<R: Rng + ?Sized>(n: u64, params: &StableParams, rng: &mut R) -> Result<f64> {
    params.validate()?;
    let alpha = params.alpha;
    let r = params.r;
    let shape_y = 1.0 - alpha;
    let shape_rest = r * n as f64 + 1.0;
    let ln_bound = r.max(1.0).ln();
    loop {
        let ln_x = sample_ln_gamma(shape_y, rng);
        let ln_z = sample_ln_gamma(shape_rest, rng);
        // Y = X / (X + Z), s = -ln(1 - Y) = ln(1 + X / Z)
        let d = ln_x - ln_z;
        let ln_y = d - softplus(d);
        let ln_s = if d < -30.0 { d } else { softplus(d).ln() };
        let s = ln_s.exp();
        let rs = r * s;
        let ln_num = if rs < 1e-8 {
            r.ln() + ln_s + (-0.5 * rs).ln_1p()
        } else {
            ln_one_minus_exp_neg(rs)
        };
        let ln_accept = ln_num - ln_bound - ln_y;
        let u: f64 = 1.0 - rng.random::<f64>();
        if u.ln() <= ln_accept {
            return Ok(s.max(f64::MIN_POSITIVE));
        }
    }
}

fn softplus(d: f64) -> f64 {
    if d > 30.0 {
        d + (-d).exp().ln_1p()
    } else {
        d.exp().ln_1p()
    }
}

/// Draws from the zero-truncated negative binomial with size `r` and success
/// probability `e^{-s}`: `Pr(A = a) ∝ C(a+r-1, a) (1-e^{-s})^a e^{-sr}`, `a >= 1`.
///
/// Repeats untruncated draws while the acceptance probability `1 - e^{-sr}`
/// is above one quarter, and otherwise inverts the truncated cdf directly.
pub fn sample_score_given_rate<R: Rng + ?Sized>(s: f64, r: f64, rng: &mut R) -> Result<u64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("trait rate must be positive and finite, got {s}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("score size r must be positive, got {r}")));
    }
    let accept = -(-s * r).exp_m1();
    if accept > 0.25 {
        let law = NegBinLaw::new(r, (-s).exp())?;
        loop {
            let a = law.sample(rng)?;
            if a >= 1 {
                return Ok(a);
            }
        }
    }
    let q = -(-s).exp_m1();
    let mut p = (r.ln() + q.ln() - s * r - accept.ln()).exp();
    let mut u: f64 = rng.random::<f64>();
    let mut a = 1u64;
    while u > p && p > 0.0 {
        u -= p;
        p *= (a as f64 + r) / (a as f64 + 1.0) * q;
        a += 1;
    }
    Ok(a)
}

/// Outcome of [`sample_grid_pmf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDraw {
    pub index: usize,
    /// Estimated mass beyond the end of the table, relative to the table mass,
    /// from a geometric extrapolation of the last two entries. Infinite when
    /// the table is not decaying at its end.
    pub tail_mass: f64,
}

/// Exact categorical draw from an unnormalised log-pmf table over `{0..M}`.
pub fn sample_grid_pmf<R: Rng + ?Sized>(logpmf: &[f64], rng: &mut R) -> Result<GridDraw> {
    if logpmf.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Degenerate("log-pmf table contains NaN or +inf".into()));
    }
    let total = log_sum_exp(logpmf);
    if total == f64::NEG_INFINITY {
        return Err(Error::Degenerate("log-pmf table has no mass".into()));
    }
    let tail_mass = grid_tail_mass(logpmf, total);
    let mut u: f64 = rng.random::<f64>();
    let mut last_positive = 0;
    for (i, &v) in logpmf.iter().enumerate() {
        let p = (v - total).exp();
        if p > 0.0 {
            last_positive = i;
        }
        if u < p {
            return Ok(GridDraw { index: i, tail_mass });
        }
        u -= p;
    }
    Ok(GridDraw { index: last_positive, tail_mass })
}

fn grid_tail_mass(logpmf: &[f64], total: f64) -> f64 {
    let m = logpmf.len();
    if m < 2 {
        return 0.0;
    }
    let (last, before) = (logpmf[m - 1], logpmf[m - 2]);
    if last == f64::NEG_INFINITY {
        return 0.0;
    }
    let ln_ratio = last - before;
    if ln_ratio >= 0.0 {
        return f64::INFINITY;
    }
    // p_M * rho / (1 - rho)
    (last + ln_ratio - ln_one_minus_exp_neg(-ln_ratio) - total).exp()
}

/// Samples from a pmf on the nonnegative integers given by `logpmf`,
/// tabulating `{0..M}` from `M = grid_start` and doubling while the
/// estimated tail mass exceeds `tail_tol`.
pub fn sample_pmf_adaptive<R, F>(
    logpmf: F,
    grid_start: usize,
    grid_max: usize,
    tail_tol: f64,
    rng: &mut R,
) -> Result<usize>
where
    R: Rng + ?Sized,
    F: Fn(usize) -> f64,
{
    let mut table: Vec<f64> = Vec::new();
    let mut m = grid_start.max(2);
    loop {
        table.extend((table.len()..=m).map(&logpmf));
        let total = log_sum_exp(&table);
        if total == f64::NEG_INFINITY {
            return Err(Error::Degenerate("log-pmf table has no mass".into()));
        }
        let tail = grid_tail_mass(&table, total);
        if tail <= tail_tol {
            return sample_grid_pmf(&table, rng).map(|d| d.index);
        }
        if m >= grid_max {
            return Err(Error::GridTruncation { tail, tol: tail_tol, grid_max });
        }
        m = (2 * m).min(grid_max);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negbin_logpmf_examples() {
        let law = NegBinLaw::new(1.0, 0.5).unwrap();
        assert!((law.logpmf(0) - 0.5_f64.ln()).abs() < 1e-15);
        let law = NegBinLaw::new(2.0, 0.25).unwrap();
        let expect = (4.0 * 0.0625 * 0.421875_f64).ln();
        assert!((law.logpmf(3) - expect).abs() < 1e-13);
    }

    #[test]
    fn negbin_rejects_bad_parameters() {
        assert!(NegBinLaw::new(0.0, 0.5).is_err());
        assert!(NegBinLaw::new(1.0, 0.0).is_err());
        assert!(NegBinLaw::new(1.0, 1.5).is_err());
        assert!(GammaLaw::new(-1.0, 1.0).is_err());
        assert!(PoissonLaw::new(-0.1).is_err());
        let mut rng = RngSeed::new(1).rng();
        assert!(sample_beta(0.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn negbin_normalises_to_quantile() {
        for &(a, p) in &[(0.3, 0.9), (60.0, 0.2), (5.5, 0.5)] {
            let law = NegBinLaw::new(a, p).unwrap();
            let k = law.quantile(1.0 - 1e-12);
            let total: f64 = (0..=k).map(|i| law.pmf(i)).sum();
            assert!((total - 1.0).abs() < 1e-9, "({a}, {p}): {total}");
        }
    }

    #[test]
    fn degenerate_cases() {
        let mut rng = RngSeed::new(3).rng();
        let zero = PoissonLaw::new(0.0).unwrap();
        for _ in 0..100 {
            assert_eq!(zero.sample(&mut rng).unwrap(), 0);
        }
        let point = NegBinLaw::new(2.0, 1.0).unwrap();
        assert_eq!(point.sample(&mut rng).unwrap(), 0);
        assert_eq!(point.logpmf(0), 0.0);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let seed = RngSeed::new(42);
        let a: Vec<u64> = (0..8).map(|_| 0).scan(seed.stream(7), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..8).map(|_| 0).scan(seed.stream(7), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..8).map(|_| 0).scan(seed.stream(8), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn grid_single_support() {
        let mut rng = RngSeed::new(5).rng();
        let table = [f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY];
        for _ in 0..50 {
            assert_eq!(sample_grid_pmf(&table, &mut rng).unwrap().index, 1);
        }
        assert!(sample_grid_pmf(&[f64::NEG_INFINITY; 3], &mut rng).is_err());
    }

    #[test]
    fn grid_tail_estimate_geometric() {
        // geometric pmf with ratio 1/2 on {0..9}: exact tail ratio 2^-10 / (1 - 2^-10)
        let table: Vec<f64> = (0..10).map(|k| -(k as f64) * 2f64.ln()).collect();
        let mut rng = RngSeed::new(1).rng();
        let draw = sample_grid_pmf(&table, &mut rng).unwrap();
        let expect = 2f64.powi(-10) / (1.0 - 2f64.powi(-10));
        assert!((draw.tail_mass - expect).abs() < 1e-14);
    }

    #[test]
    fn truncated_score_at_least_one() {
        let mut rng = RngSeed::new(9).rng();
        for &s in &[1e-6, 0.01, 0.3, 2.0, 30.0] {
            for _ in 0..200 {
                assert!(sample_score_given_rate(s, 2.5, &mut rng).unwrap() >= 1);
            }
        }
    }

    #[test]
    fn h_sampler_is_positive() {
        let mut rng = RngSeed::new(11).rng();
        let params = StableParams::new(0.99, 1.0, 1.0, 0.3).unwrap();
        for n in [0, 1, 1000] {
            for _ in 0..200 {
                let h = sample_h_new_trait(n, &params, &mut rng).unwrap();
                assert!(h > 0.0 && h.is_finite());
            }
        }
    }
}
