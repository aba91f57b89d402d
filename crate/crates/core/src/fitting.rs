//! Empirical-Bayes hyperparameter estimation by maximizing the log marginal
//! likelihood.
//!
//! Free parameters are optimized on an unconstrained scale (`logit α`, `log`
//! of the positive parameters) with a quasi-Newton (BFGS) iteration driven by
//! central finite-difference gradients. Several random starts run in parallel
//! and the best local maximum is returned.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{log_marginal_nbga, GammaProcParams};
use crate::distributions::RngSeed;
use crate::error::{Error, Result};
use crate::special_math::{Quadrature, StableParams};
use crate::stsp::{log_marginal_nb, log_marginal_poisson, log_marginal_sbsp, SuffStats, TraitDataset};

/// Prior/score model whose marginal likelihood is maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Stable-tilted scaled process with negative binomial scores.
    NbStsp,
    /// Stable-tilted scaled process with Poisson scores.
    PoissonStsp,
    /// Stable-Beta scaled process on presence/absence data.
    Sbsp,
    /// Gamma-process prior with negative binomial scores.
    Nbga,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::NbStsp, ModelKind::PoissonStsp, ModelKind::Sbsp, ModelKind::Nbga];

    /// Hyperparameters entering the model's marginal likelihood.
    pub fn params(self) -> &'static [ParamName] {
        use ParamName::*;
        match self {
            ModelKind::NbStsp | ModelKind::PoissonStsp => &[Alpha, C, Theta, R],
            ModelKind::Sbsp => &[Alpha, C, Theta],
            ModelKind::Nbga => &[Theta, R],
        }
    }

    /// Command-line spelling (`nb-stsp`, `poisson-stsp`, `sbsp`, `nbga`).
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::NbStsp => "nb-stsp",
            ModelKind::PoissonStsp => "poisson-stsp",
            ModelKind::Sbsp => "sbsp",
            ModelKind::Nbga => "nbga",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "nb-stsp" => Ok(ModelKind::NbStsp),
            "poisson-stsp" => Ok(ModelKind::PoissonStsp),
            "sbsp" => Ok(ModelKind::Sbsp),
            "nbga" | "nb-ga" => Ok(ModelKind::Nbga),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

/// Name of a hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamName {
    Alpha,
    C,
    Theta,
    R,
}

impl ParamName {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::Alpha => "alpha",
            ParamName::C => "c",
            ParamName::Theta => "theta",
            ParamName::R => "r",
        }
    }

    /// Natural value to unconstrained coordinate.
    pub fn to_unconstrained(self, v: f64) -> f64 {
        match self {
            ParamName::Alpha => (v / (1.0 - v)).ln(),
            _ => v.ln(),
        }
    }

    /// Unconstrained coordinate to natural value.
    pub fn from_unconstrained(self, z: f64) -> f64 {
        match self {
            ParamName::Alpha => 1.0 / (1.0 + (-z).exp()),
            _ => z.exp(),
        }
    }

    /// Box on the unconstrained scale from which multistart points are drawn.
    pub fn start_box(self) -> (f64, f64) {
        match self {
            ParamName::Alpha => (-2.0, 2.0),
            ParamName::C => (0.0, 6.0),
            ParamName::Theta => (-2.0, 2.0),
            ParamName::R => (0.0, 4.0),
        }
    }

    /// Checks that `v` lies in the open domain of the parameter.
    pub fn check(self, v: f64) -> Result<()> {
        let ok = match self {
            ParamName::Alpha => v > 0.0 && v < 1.0,
            _ => v > 0.0 && v.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("{} = {v} is outside its domain", self.as_str())))
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alpha" => Ok(ParamName::Alpha),
            "c" => Ok(ParamName::C),
            "theta" => Ok(ParamName::Theta),
            "r" => Ok(ParamName::R),
            other => Err(Error::Config(format!("unknown parameter {other:?}"))),
        }
    }
}

/// Quasi-Newton and multistart settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Gradient-norm threshold on the unconstrained scale.
    pub grad_tol: f64,
    /// Relative objective change threshold.
    pub rel_tol: f64,
    pub multistart: usize,
    /// Central-difference step on the unconstrained scale.
    pub fd_step: f64,
    pub seed: u64,
    pub record_trace: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            max_iterations: 500,
            grad_tol: 1e-6,
            rel_tol: 1e-10,
            multistart: 5,
            fd_step: 1e-5,
            seed: 0,
            record_trace: false,
        }
    }
}

/// What to fit: the model, which parameters are free and the values of the
/// others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub model: ModelKind,
    pub free_params: Vec<ParamName>,
    pub fixed_values: BTreeMap<ParamName, f64>,
    #[serde(default)]
    pub settings: OptimizerSettings,
}

impl FitSpec {
    /// All model parameters free, except `θ = 1` for the ST-SP count models
    /// where it cancels from the marginal.
    pub fn new(model: ModelKind) -> Self {
        let mut spec = FitSpec {
            model,
            free_params: model.params().to_vec(),
            fixed_values: BTreeMap::new(),
            settings: OptimizerSettings::default(),
        };
        if matches!(model, ModelKind::NbStsp | ModelKind::PoissonStsp) {
            spec = spec.fix(ParamName::Theta, 1.0);
        }
        spec
    }

    /// Fixes `name` at `value`, removing it from the free set.
    pub fn fix(mut self, name: ParamName, value: f64) -> Self {
        self.free_params.retain(|&p| p != name);
        self.fixed_values.insert(name, value);
        self
    }

    /// Frees `name`, dropping any fixed value.
    pub fn free(mut self, name: ParamName) -> Self {
        self.fixed_values.remove(&name);
        if !self.free_params.contains(&name) {
            self.free_params.push(name);
        }
        self
    }

    pub fn with_settings(mut self, settings: OptimizerSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for &p in self.model.params() {
            let free = self.free_params.contains(&p);
            let fixed = self.fixed_values.contains_key(&p);
            if free && fixed {
                return Err(Error::Config(format!("{p} is both free and fixed")));
            }
            if !free && !fixed {
                return Err(Error::Config(format!("{p} is neither free nor fixed for model {}", self.model)));
            }
        }
        for p in self.free_params.iter().chain(self.fixed_values.keys()) {
            if !self.model.params().contains(p) {
                return Err(Error::Config(format!("{p} is not a parameter of model {}", self.model)));
            }
        }
        for (&p, &v) in &self.fixed_values {
            p.check(v)?;
        }
        if self.settings.multistart == 0 && !self.free_params.is_empty() {
            return Err(Error::Config("multistart count must be at least 1".into()));
        }
        if !(self.settings.fd_step > 0.0) {
            return Err(Error::Config("finite-difference step must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub params: BTreeMap<ParamName, f64>,
    pub log_marginal: f64,
    pub converged: bool,
    pub iterations: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

impl FitResult {
    pub fn get(&self, name: ParamName) -> Result<f64> {
        self.params
            .get(&name)
            .copied()
            .ok_or_else(|| Error::Config(format!("fit result has no value for {name}")))
    }

    /// Parameters as `StableParams` (ST-SP and SB-SP models; `r = 1` when the
    /// model has no score dispersion).
    pub fn stable_params(&self) -> Result<StableParams> {
        stable_from_map(self.model, &self.params)
    }

    /// Parameters as `GammaProcParams` (NB-Ga).
    pub fn gamma_params(&self) -> Result<GammaProcParams> {
        GammaProcParams::new(self.get(ParamName::Theta)?, self.get(ParamName::R)?)
    }
}

fn stable_from_map(model: ModelKind, params: &BTreeMap<ParamName, f64>) -> Result<StableParams> {
    let get = |p: ParamName| {
        params.get(&p).copied().ok_or_else(|| Error::Config(format!("missing value for {p}")))
    };
    let r = if model == ModelKind::Sbsp { params.get(&ParamName::R).copied().unwrap_or(1.0) } else { get(ParamName::R)? };
    StableParams::new(get(ParamName::Alpha)?, get(ParamName::C)?, get(ParamName::Theta)?, r)
}

/// Log marginal likelihood of one dataset as a function of the model's
/// hyperparameters. Sufficient statistics are computed once.
#[derive(Debug, Clone)]
pub struct ModelObjective {
    model: ModelKind,
    stats: SuffStats,
    quad: Quadrature,
}

impl ModelObjective {
    pub fn new(data: &TraitDataset, model: ModelKind, quad: Quadrature) -> Result<Self> {
        let stats = match model {
            ModelKind::Sbsp => SuffStats::from_dataset(&data.binarize(), 1.0)?,
            _ => SuffStats::from_dataset(data, 1.0)?,
        };
        Ok(ModelObjective { model, stats, quad })
    }

    pub fn stats(&self) -> &SuffStats {
        &self.stats
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn log_marginal(&self, params: &BTreeMap<ParamName, f64>) -> Result<f64> {
        match self.model {
            ModelKind::NbStsp => log_marginal_nb(&self.stats, &stable_from_map(self.model, params)?, &self.quad),
            ModelKind::PoissonStsp => {
                log_marginal_poisson(&self.stats, &stable_from_map(self.model, params)?, &self.quad)
            }
            ModelKind::Sbsp => log_marginal_sbsp(&self.stats, &stable_from_map(self.model, params)?),
            ModelKind::Nbga => {
                let theta = params.get(&ParamName::Theta).copied().unwrap_or(f64::NAN);
                let r = params.get(&ParamName::R).copied().unwrap_or(f64::NAN);
                log_marginal_nbga(&self.stats, &GammaProcParams::new(theta, r)?, &self.quad)
            }
        }
    }
}

/// Fits with the default quadrature rule.
pub fn fit(data: &TraitDataset, spec: &FitSpec) -> Result<FitResult> {
    fit_with_quadrature(data, spec, &Quadrature::default())
}

pub fn fit_with_quadrature(data: &TraitDataset, spec: &FitSpec, quad: &Quadrature) -> Result<FitResult> {
    spec.validate()?;
    let objective = ModelObjective::new(data, spec.model, quad.clone())?;
    if objective.stats.k_n == 0 && !spec.free_params.is_empty() {
        log::warn!("fitting {} on a dataset with no displayed traits; the maximizer may lie on the boundary", spec.model);
    }
    fit_objective(&objective, spec)
}

/// Maximizes a prepared objective.
pub fn fit_objective(objective: &ModelObjective, spec: &FitSpec) -> Result<FitResult> {
    spec.validate()?;
    let settings = spec.settings;
    let free = &spec.free_params;
    let to_params = |z: &[f64]| {
        let mut p = spec.fixed_values.clone();
        for (&name, &zi) in free.iter().zip(z) {
            p.insert(name, name.from_unconstrained(zi));
        }
        p
    };
    let neg_log_marginal = |z: &[f64]| match objective.log_marginal(&to_params(z)) {
        Ok(v) if v.is_finite() => -v,
        _ => f64::INFINITY,
    };

    if free.is_empty() {
        let params = spec.fixed_values.clone();
        let log_marginal = objective.log_marginal(&params)?;
        if !log_marginal.is_finite() {
            return Err(Error::Numerical(format!("log marginal is {log_marginal} at the fixed values")));
        }
        return Ok(FitResult {
            model: spec.model,
            params,
            log_marginal,
            converged: true,
            iterations: 0,
            seed: settings.seed,
            trace: settings.record_trace.then(Vec::new),
        });
    }

    let starts = unconstrained_starts(spec);

    let runs: Vec<Option<BfgsRun>> = starts.par_iter().map(|z0| bfgs_minimize(&neg_log_marginal, z0, &settings)).collect();
    let best = runs
        .into_iter()
        .flatten()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| {
            let shown: Vec<String> = starts.iter().map(|z| format!("{:?}", to_params(z))).collect();
            Error::FitFailure(format!(
                "log marginal of {} is not finite at any of {} starting points: {}",
                spec.model,
                starts.len(),
                shown.join("; ")
            ))
        })?;
    log::debug!(
        "{} fit: -log m = {} after {} iterations (converged: {})",
        spec.model,
        best.value,
        best.iterations,
        best.converged
    );
    Ok(FitResult {
        model: spec.model,
        params: to_params(&best.x),
        log_marginal: -best.value,
        converged: best.converged,
        iterations: best.iterations,
        seed: settings.seed,
        trace: settings.record_trace.then(|| best.trace.iter().map(|v| -v).collect()),
    })
}

fn unconstrained_starts(spec: &FitSpec) -> Vec<Vec<f64>> {
    let seed = RngSeed::new(spec.settings.seed);
    (0..spec.settings.multistart as u64)
        .map(|i| {
            let mut rng = seed.stream(i);
            spec.free_params
                .iter()
                .map(|p| {
                    let (lo, hi) = p.start_box();
                    rng.random_range(lo..hi)
                })
                .collect()
        })
        .collect()
}

/// Multistart initial points of `spec`, as full parameter maps.
pub fn start_points(spec: &FitSpec) -> Vec<BTreeMap<ParamName, f64>> {
    unconstrained_starts(spec)
        .into_iter()
        .map(|z| {
            let mut p = spec.fixed_values.clone();
            for (&name, zi) in spec.free_params.iter().zip(z) {
                p.insert(name, name.from_unconstrained(zi));
            }
            p
        })
        .collect()
}

/// Log-marginal profile: `param` is fixed at each grid value and the remaining
/// free parameters are re-optimized.
pub fn profile(data: &TraitDataset, spec: &FitSpec, param: ParamName, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let quad = Quadrature::default();
    let objective = ModelObjective::new(data, spec.model, quad)?;
    grid.iter()
        .map(|&v| {
            param.check(v)?;
            let fit = fit_objective(&objective, &spec.clone().fix(param, v))?;
            Ok((v, fit.log_marginal))
        })
        .collect()
}

struct BfgsRun {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

// Longest step allowed on the unconstrained scale.
const MAX_STEP: f64 = 5.0;
const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

fn central_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: f64) -> Vec<f64> {
    let mut z = x.to_vec();
    (0..x.len())
        .map(|i| {
            z[i] = x[i] + h;
            let up = f(&z);
            z[i] = x[i] - h;
            let down = f(&z);
            z[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scaled_identity(d: usize, g: &[f64]) -> Vec<Vec<f64>> {
    let scale = 1.0 / dot(g, g).sqrt().max(1.0);
    (0..d).map(|i| (0..d).map(|j| if i == j { scale } else { 0.0 }).collect()).collect()
}

/// BFGS minimization with Armijo backtracking. Returns `None` when the
/// objective is not finite at the starting point.
fn bfgs_minimize<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], settings: &OptimizerSettings) -> Option<BfgsRun> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return None;
    }
    let mut g = central_gradient(f, &x, settings.fd_step);
    let mut h = scaled_identity(d, &g);
    let mut trace = vec![fx];
    let mut converged = false;
    let mut iterations = 0;
    let mut fresh = true;

    while iterations < settings.max_iterations {
        if g.iter().any(|v| !v.is_finite()) {
            break;
        }
        if dot(&g, &g).sqrt() < settings.grad_tol {
            converged = true;
            break;
        }
        let mut p: Vec<f64> = h.iter().map(|row| -dot(row, &g)).collect();
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            h = scaled_identity(d, &g);
            fresh = true;
            p = h.iter().map(|row| -dot(row, &g)).collect();
            slope = dot(&g, &p);
        }
        let norm = dot(&p, &p).sqrt();
        if norm > MAX_STEP {
            for v in &mut p {
                *v *= MAX_STEP / norm;
            }
            slope *= MAX_STEP / norm;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + step * pi).collect();
            let fnew = f(&xn);
            if fnew.is_finite() && fnew <= fx + ARMIJO_C * step * slope {
                accepted = Some((xn, fnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if fresh {
                break;
            }
            h = scaled_identity(d, &g);
            fresh = true;
            continue;
        };
        iterations += 1;
        fresh = false;

        let gn = central_gradient(f, &xn, settings.fd_step);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy.is_finite() {
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = h.iter().map(|row| dot(row, &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..d {
                for j in 0..d {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        let rel = (fx - fnew).abs() / fx.abs().max(1.0);
        x = xn;
        fx = fnew;
        g = gn;
        trace.push(fx);
        if rel < settings.rel_tol {
            converged = true;
            break;
        }
    }
    Some(BfgsRun { x, value: fx, iterations, converged, trace })
}
