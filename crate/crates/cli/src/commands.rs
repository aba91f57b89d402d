//! Subcommand implementations.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use stsp_core::baselines::{unseen_traits_law_nbga, unseen_traits_law_sbsp};
use stsp_core::classifier::{
    build_vocab, evaluate, parse_stopwords, train_with_quadrature, ClassPrior, Corpus, Document, DEFAULT_STOPWORDS,
};
use stsp_core::distributions::{NegBinLaw, PoissonLaw, RngSeed};
use stsp_core::fitting::{fit_with_quadrature, FitResult, FitSpec, ModelKind, ParamName};
use stsp_core::generative::{
    new_trait_curve, simulate_restaurant_with, simulate_zipf, split_rows, zipf_weight, OldTraitSampler, ZipfConfig,
};
use stsp_core::special_math::{Quadrature, StableParams};
use stsp_core::stsp::{suff_stats, unseen_traits_law, SuffStats};

use crate::corpus::{class_labels, read_class_dirs, read_count_csv, RawDoc};
use crate::io::{self, DatasetManifest, MANIFEST_VERSION};
use crate::{ClassifyArgs, CliError, FitArgs, FitOptions, Generator, PredictArgs, SimulateArgs};

/// Contents of the JSON file written by `stsp fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub version: u32,
    pub n_train: usize,
    pub fit: FitResult,
}

fn quadrature(order: Option<usize>) -> Result<Quadrature, CliError> {
    Ok(match order {
        Some(order) => Quadrature::new(order)?,
        None => Quadrature::default(),
    })
}

impl FitOptions {
    /// Fit specification with every given parameter fixed.
    fn spec(&self, model: ModelKind) -> Result<FitSpec, CliError> {
        let mut spec = FitSpec::new(model);
        let given = [
            (ParamName::Alpha, self.alpha),
            (ParamName::C, self.c),
            (ParamName::Theta, self.theta),
            (ParamName::R, self.r),
        ];
        for (name, value) in given {
            if let Some(v) = value {
                if !model.params().contains(&name) {
                    return Err(CliError::Config(format!("model {model} has no parameter {name}")));
                }
                spec = spec.fix(name, v);
            }
        }
        spec.settings.seed = self.seed;
        spec.settings.multistart = self.multistart;
        spec.validate()?;
        Ok(spec)
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let seed = RngSeed::new(args.seed);
    let (data, generator) = match args.generator {
        Generator::Restaurant => {
            let params = StableParams::new(args.alpha, args.c, args.theta, args.r)?;
            let sampler = match args.grid_max {
                Some(m) => OldTraitSampler::grid(m),
                None => OldTraitSampler::Mixture,
            };
            let data = simulate_restaurant_with(args.n, &params, seed.rng(), sampler, &Quadrature::default())?;
            let info = json!({
                "name": "restaurant",
                "alpha": args.alpha,
                "c": args.c,
                "theta": args.theta,
                "r": args.r,
                "sampler": sampler,
            });
            (data, info)
        }
        Generator::Zipf => {
            let config = ZipfConfig { k_max: args.k_max, ..ZipfConfig::new(args.xi, args.r) };
            let k_max = config.effective_k_max()?;
            if args.n == 0 {
                return Err(CliError::Config("simulation needs at least one observation".into()));
            }
            let data = simulate_zipf(args.n, &config, seed)?;
            let info = json!({
                "name": "zipf",
                "xi": args.xi,
                "r": args.r,
                "k_max": k_max,
                "q1": zipf_weight(1, args.xi),
            });
            (data, info)
        }
    };
    io::create_dir(&args.out)?;
    io::write_dataset(&args.out.join("dataset.csv"), &data)?;
    let manifest =
        DatasetManifest { generator: Some(generator), seed: Some(args.seed), ..DatasetManifest::describe(&data) };
    io::write_json(&args.out.join(io::DATASET_MANIFEST), &manifest)?;
    log::info!("simulated {} observations with {} traits", data.n_obs, data.n_traits());
    Ok(())
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let spec = args.options.spec(args.model)?;
    let quad = quadrature(args.options.quad_order)?;
    let data = io::read_dataset(&args.data, args.n_obs, None)?;
    let n_train = args.train.unwrap_or(data.n_obs);
    if n_train > data.n_obs {
        return Err(CliError::Config(format!("--train {n_train} exceeds the {} observations", data.n_obs)));
    }
    let train = data.prefix(n_train);
    let fit = fit_with_quadrature(&train, &spec, &quad)?;
    if !fit.converged {
        log::warn!("optimizer stopped after {} iterations without converging", fit.iterations);
    }
    io::write_json(&args.out, &FitOutput { version: MANIFEST_VERSION, n_train, fit })
}

/// Predictive law of the number of unseen traits.
enum UnseenLaw {
    NegBin(NegBinLaw),
    Poisson(PoissonLaw),
}

impl UnseenLaw {
    fn mean(&self) -> f64 {
        match self {
            UnseenLaw::NegBin(l) => l.mean(),
            UnseenLaw::Poisson(l) => l.mean,
        }
    }

    fn quantile(&self, level: f64) -> u64 {
        match self {
            UnseenLaw::NegBin(l) => l.quantile(level),
            UnseenLaw::Poisson(l) => l.quantile(level),
        }
    }
}

fn unseen_law(fit: &FitResult, stats: &SuffStats, m: u64, quad: &Quadrature) -> Result<UnseenLaw, CliError> {
    Ok(match fit.model {
        ModelKind::NbStsp | ModelKind::PoissonStsp => {
            UnseenLaw::NegBin(unseen_traits_law(stats, &fit.stable_params()?, m, quad)?)
        }
        ModelKind::Sbsp => UnseenLaw::NegBin(unseen_traits_law_sbsp(stats, &fit.stable_params()?, m)?),
        ModelKind::Nbga => UnseenLaw::Poisson(unseen_traits_law_nbga(stats.n, m, &fit.gamma_params()?)?),
    })
}

fn horizon_grid(args: &PredictArgs) -> Result<Vec<u64>, CliError> {
    if let Some(grid) = &args.m_grid {
        if grid.is_empty() {
            return Err(CliError::Config("--m-grid is empty".into()));
        }
        return Ok(grid.clone());
    }
    let Some(m_max) = args.m_max else {
        return Err(CliError::Config("give either --m-grid or --m-max".into()));
    };
    if args.m_step == 0 {
        return Err(CliError::Config("--m-step must be positive".into()));
    }
    Ok((args.m_step..=m_max).step_by(args.m_step as usize).collect())
}

pub fn predict(args: &PredictArgs) -> Result<(), CliError> {
    let saved: FitOutput = io::read_json(&args.fit)?;
    let fit = saved.fit;
    let quad = quadrature(args.quad_order)?;
    let grid = horizon_grid(args)?;
    let data = io::read_dataset(&args.data, args.n_obs, None)?;
    let n_train = args.train.unwrap_or(saved.n_train);
    if n_train > data.n_obs {
        return Err(CliError::Config(format!("training size {n_train} exceeds the {} observations", data.n_obs)));
    }
    let (train, stream) = split_rows(&data, n_train);
    let stats = match fit.model {
        ModelKind::Sbsp => suff_stats(&train.binarize(), 1.0)?,
        ModelKind::Nbga => suff_stats(&train, fit.get(ParamName::R)?)?,
        ModelKind::NbStsp | ModelKind::PoissonStsp => suff_stats(&train, fit.stable_params()?.r)?,
    };
    let truth = if args.holdout {
        if stream.n_obs == 0 {
            log::warn!("no observations after the training sample to compare with");
        }
        new_trait_curve(&train, &stream, &grid)
            .into_iter()
            .map(|(m, k)| (m <= stream.n_obs as u64).then_some(k))
            .collect()
    } else {
        vec![None; grid.len()]
    };
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&args.out)?;
    writer.write_record(["m", "mean", "lo", "hi", "truth"])?;
    for (&m, truth) in grid.iter().zip(truth) {
        let (mean, lo, hi) = if m == 0 {
            (0.0, 0, 0)
        } else {
            let law = unseen_law(&fit, &stats, m, &quad)?;
            (law.mean(), law.quantile(0.025), law.quantile(0.975))
        };
        writer.write_record([
            m.to_string(),
            format!("{mean:?}"),
            lo.to_string(),
            hi.to_string(),
            truth.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    writer.flush().map_err(|e| CliError::io(&args.out, e))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ClassSummary {
    label: String,
    n_docs: u64,
    n_words: u64,
    params: std::collections::BTreeMap<ParamName, f64>,
    log_marginal: f64,
    converged: bool,
}

#[derive(Debug, Serialize)]
struct ClassifySummary {
    version: u32,
    model: ModelKind,
    accuracy: f64,
    n_test: usize,
    classes: Vec<ClassSummary>,
    confusion: Vec<Vec<u64>>,
    vocabulary_size: usize,
}

fn read_stopwords(path: Option<&Path>) -> Result<BTreeSet<String>, CliError> {
    match path {
        Some(p) => Ok(parse_stopwords(&fs::read_to_string(p).map_err(|e| CliError::io(p, e))?)),
        None => Ok(parse_stopwords(DEFAULT_STOPWORDS)),
    }
}

fn load_docs(args: &ClassifyArgs) -> Result<(Vec<RawDoc>, Vec<RawDoc>), CliError> {
    match (&args.train_dir, &args.test_dir, &args.train_csv, &args.test_csv) {
        (Some(train), Some(test), None, None) => Ok((read_class_dirs(train)?, read_class_dirs(test)?)),
        (None, None, Some(train), Some(test)) => Ok((read_count_csv(train)?, read_count_csv(test)?)),
        _ => Err(CliError::Config("give either --train-dir and --test-dir or --train-csv and --test-csv".into())),
    }
}

pub fn classify(args: &ClassifyArgs) -> Result<(), CliError> {
    let spec = args.options.spec(args.model)?;
    let quad = quadrature(args.options.quad_order)?;
    let stopwords = read_stopwords(args.stopwords.as_deref())?;
    let (train_docs, test_docs) = load_docs(args)?;
    let classes = class_labels(&train_docs);
    let raw_tokens: Vec<Vec<&str>> = train_docs.iter().map(RawDoc::tokens).collect();
    let vocab = build_vocab(&raw_tokens, &stopwords, args.min_doc_freq)?;

    let mut documents: Vec<Vec<Document>> = vec![Vec::new(); classes.len()];
    for d in &train_docs {
        let j = classes.binary_search(&d.class).expect("class list built from training documents");
        documents[j].push(d.to_document(&vocab));
    }
    let corpus = Corpus::new(classes.clone(), documents)?;
    let prior = if args.empirical_prior { ClassPrior::Empirical } else { ClassPrior::Uniform };
    let clf = train_with_quadrature(&corpus, args.model, &spec, &quad)?.with_prior(prior);

    let mut labelled = Vec::with_capacity(test_docs.len());
    for d in &test_docs {
        let j = classes
            .binary_search(&d.class)
            .map_err(|_| CliError::Config(format!("test document {} has unknown class {}", d.id, d.class)))?;
        labelled.push((j, d));
    }
    // evaluation rows come back ordered by true class
    labelled.sort_by_key(|&(j, _)| j);
    let test: Vec<(usize, Document)> = labelled.iter().map(|&(j, d)| (j, d.to_document(&vocab))).collect();
    let eval = evaluate(&clf, &test)?;

    io::create_dir(&args.out)?;
    let prob_path = args.out.join("probabilities.csv");
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&prob_path)?;
    let mut header = vec!["doc_id".to_string(), "label".to_string(), "predicted".to_string()];
    header.extend(classes.iter().map(|c| format!("p_{c}")));
    writer.write_record(&header)?;
    for ((&(_, d), &label), probs) in labelled.iter().zip(&eval.labels).zip(&eval.probabilities) {
        let predicted = argmax(probs);
        let mut record = vec![d.id.clone(), classes[label].clone(), classes[predicted].clone()];
        record.extend(probs.iter().map(|p| format!("{p:?}")));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| CliError::io(&prob_path, e))?;

    let summary = ClassifySummary {
        version: MANIFEST_VERSION,
        model: args.model,
        accuracy: eval.accuracy,
        n_test: test.len(),
        classes: clf
            .classes
            .iter()
            .map(|c| ClassSummary {
                label: c.label.clone(),
                n_docs: c.n_docs,
                n_words: c.k_n(),
                params: c.fit.params.clone(),
                log_marginal: c.fit.log_marginal,
                converged: c.fit.converged,
            })
            .collect(),
        confusion: eval.confusion,
        vocabulary_size: vocab.len(),
    };
    io::write_json(&args.out.join("summary.json"), &summary)?;
    log::info!("accuracy {:.4} on {} documents", eval.accuracy, test.len());
    Ok(())
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}
