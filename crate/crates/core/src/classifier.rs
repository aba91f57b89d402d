//! Nonparametric naive-Bayes text classification.
//!
//! Each class is modelled separately as a trait-allocation sample in which
//! documents are observations and words are traits scored by their counts.
//! A test document is assigned to class `j` with probability proportional to
//! the predictive `m(train_j ∪ doc) / m(train_j)` under the class's fitted
//! prior (NB-ST-SP or NB-Ga). Words never seen in a class, including words
//! outside the training vocabulary, enter as new traits.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{log_j_integral, GammaProcParams};
use crate::distributions::RngSeed;
use crate::error::{Error, Result};
use crate::fitting::{fit_with_quadrature, FitResult, FitSpec, ModelKind};
use crate::special_math::{i_integral, ln_beta, ln_gamma_diff, ln_nb_coef, Quadrature, StableParams};
use crate::stsp::{log_predictive_old_trait, ScoreKind, TraitDataset, TraitRecord};

/// Default English stopword list, one token per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Lowercases, splits on non-alphanumeric characters and drops purely
/// numeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|ch: char| !ch.is_alphanumeric())
        .filter(|t| !t.is_empty() && !t.chars().all(|ch| ch.is_numeric()))
        .map(|t| t.to_lowercase())
        .collect()
}

/// Parses a stopword file: one token per line, blank lines and `#` comments
/// ignored.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Token-to-id map of the retained training words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<u64>,
    stopwords: BTreeSet<String>,
    min_doc_freq: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Number of training documents containing each retained token.
    pub fn doc_freq(&self) -> &[u64] {
        &self.doc_freq
    }

    pub fn min_doc_freq(&self) -> u64 {
        self.min_doc_freq
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    /// Bag of words of a tokenized document. Stopwords are dropped;
    /// other tokens outside the vocabulary are kept as out-of-vocabulary
    /// counts.
    pub fn document<S: AsRef<str>>(&self, tokens: &[S]) -> Document {
        let mut counts = BTreeMap::new();
        let mut oov: BTreeMap<&str, u64> = BTreeMap::new();
        for t in tokens {
            let t = t.as_ref();
            if self.stopwords.contains(t) {
                continue;
            }
            match self.index.get(t) {
                Some(&id) => *counts.entry(id).or_insert(0) += 1,
                None => *oov.entry(t).or_insert(0) += 1,
            }
        }
        Document { counts, oov_counts: oov.into_values().collect() }
    }
}

/// Builds the vocabulary from tokenized training documents: tokens that are
/// not stopwords and appear in at least `min_doc_freq` documents, with ids in
/// order of first appearance.
pub fn build_vocab<S: AsRef<str>>(
    raw_docs: &[Vec<S>],
    stopwords: &BTreeSet<String>,
    min_doc_freq: u64,
) -> Result<Vocabulary> {
    let mut order: Vec<&str> = Vec::new();
    let mut df: HashMap<&str, u64> = HashMap::new();
    for doc in raw_docs {
        let distinct: BTreeSet<&str> = doc.iter().map(AsRef::as_ref).collect();
        for t in doc.iter().map(AsRef::as_ref) {
            if !df.contains_key(t) && !stopwords.contains(t) {
                df.insert(t, 0);
                order.push(t);
            }
        }
        for t in distinct {
            if let Some(v) = df.get_mut(t) {
                *v += 1;
            }
        }
    }
    let mut tokens = Vec::new();
    let mut doc_freq = Vec::new();
    for t in order {
        if df[t] >= min_doc_freq {
            tokens.push(t.to_string());
            doc_freq.push(df[t]);
        }
    }
    if tokens.is_empty() {
        return Err(Error::Config(format!(
            "vocabulary is empty after removing stopwords and tokens in fewer than {min_doc_freq} documents"
        )));
    }
    let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(Vocabulary { tokens, index, doc_freq, stopwords: stopwords.clone(), min_doc_freq })
}

/// Bag-of-words document over a vocabulary, plus the counts of distinct
/// out-of-vocabulary tokens.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub counts: BTreeMap<usize, u64>,
    pub oov_counts: Vec<u64>,
}

impl Document {
    pub fn from_counts<I: IntoIterator<Item = (usize, u64)>>(counts: I) -> Self {
        let mut doc = Document::default();
        for (id, a) in counts {
            if a > 0 {
                *doc.counts.entry(id).or_insert(0) += a;
            }
        }
        doc
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty() && self.oov_counts.iter().all(|&a| a == 0)
    }

    pub fn n_tokens(&self) -> u64 {
        self.counts.values().sum::<u64>() + self.oov_counts.iter().sum::<u64>()
    }
}

/// Labelled training documents over a shared vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub classes: Vec<String>,
    pub documents: Vec<Vec<Document>>,
}

impl Corpus {
    pub fn new(classes: Vec<String>, documents: Vec<Vec<Document>>) -> Result<Self> {
        let corpus = Corpus { classes, documents };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Config("corpus has no classes".into()));
        }
        if self.classes.len() != self.documents.len() {
            return Err(Error::Data(format!(
                "{} class labels but {} document groups",
                self.classes.len(),
                self.documents.len()
            )));
        }
        for (label, docs) in self.classes.iter().zip(&self.documents) {
            if docs.is_empty() {
                return Err(Error::Data(format!("class {label:?} has no training documents")));
            }
        }
        Ok(())
    }

    /// Training documents of one class as a trait dataset (documents are
    /// observations, vocabulary ids are trait ids, out-of-vocabulary words
    /// are ignored).
    pub fn class_dataset(&self, class: usize) -> TraitDataset {
        docs_to_dataset(&self.documents[class])
    }
}

fn docs_to_dataset(docs: &[Document]) -> TraitDataset {
    let mut traits: BTreeMap<usize, TraitRecord> = BTreeMap::new();
    for (i, doc) in docs.iter().enumerate() {
        for (&id, &a) in &doc.counts {
            traits
                .entry(id)
                .or_insert_with(|| TraitRecord::new(id.to_string()))
                .entries
                .insert(i, a as f64);
        }
    }
    let mut data = TraitDataset::new(docs.len(), ScoreKind::Count);
    data.traits = traits.into_values().collect();
    data
}

/// Class prior used in the assignment probabilities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassPrior {
    #[default]
    Uniform,
    /// Proportional to the number of training documents.
    Empirical,
}

/// Per-class fitted model and cached quantities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassModel {
    pub label: String,
    pub n_docs: u64,
    pub fit: FitResult,
    /// Total training count of each word seen in the class.
    pub word_totals: BTreeMap<usize, u64>,
    /// Log predictive of a document containing none of the class's words
    /// and no new words.
    pub empty_doc_log_predictive: f64,
    tilt: TiltCache,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum TiltCache {
    /// `ln(1 + α I(r, n))` and `ln(1 + α I(r, n+1))`.
    Stable { ln_rate_n: f64, ln_rate_next: f64 },
    /// `θ ln((1 + (n+1) r) / (1 + nr))`.
    Gamma { void_increment: f64 },
}

impl ClassModel {
    pub fn k_n(&self) -> u64 {
        self.word_totals.len() as u64
    }
}

/// Classifier trained by fitting one prior per class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub model: ModelKind,
    pub classes: Vec<ClassModel>,
    pub prior: ClassPrior,
}

/// Fits the chosen model to every class (in parallel).
pub fn train(corpus: &Corpus, model: ModelKind, spec: &FitSpec) -> Result<TrainedClassifier> {
    train_with_quadrature(corpus, model, spec, &Quadrature::default())
}

pub fn train_with_quadrature(
    corpus: &Corpus,
    model: ModelKind,
    spec: &FitSpec,
    quad: &Quadrature,
) -> Result<TrainedClassifier> {
    corpus.validate()?;
    if !matches!(model, ModelKind::NbStsp | ModelKind::Nbga) {
        return Err(Error::Config(format!("classifier supports nb-stsp and nbga, not {model}")));
    }
    if spec.model != model {
        return Err(Error::Config(format!("fit spec is for {}, classifier model is {model}", spec.model)));
    }
    let classes = (0..corpus.classes.len())
        .into_par_iter()
        .map(|j| {
            let label = &corpus.classes[j];
            let data = corpus.class_dataset(j);
            let fit = fit_with_quadrature(&data, spec, quad)
                .map_err(|e| Error::FitFailure(format!("class {label:?}: {e}")))?;
            class_model(label.clone(), &data, fit, quad)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainedClassifier { model, classes, prior: ClassPrior::Uniform })
}

/// Builds a class model from already-fitted parameters.
pub fn class_model(label: String, data: &TraitDataset, fit: FitResult, quad: &Quadrature) -> Result<ClassModel> {
    let n = data.n_obs as u64;
    let mut word_totals = BTreeMap::new();
    for t in &data.traits {
        let id: usize = t
            .trait_id
            .parse()
            .map_err(|_| Error::Data(format!("class trait id {:?} is not a vocabulary id", t.trait_id)))?;
        let q = t.entries.values().sum::<f64>().round() as u64;
        if q > 0 {
            word_totals.insert(id, q);
        }
    }
    let mut total_hist: BTreeMap<u64, u64> = BTreeMap::new();
    for &q in word_totals.values() {
        *total_hist.entry(q).or_insert(0) += 1;
    }
    let (tilt, empty) = match fit.model {
        ModelKind::NbStsp => {
            let p = fit.stable_params()?;
            let ln_rate_n = (p.alpha * i_integral(p.r, n, p.alpha, quad)?).ln_1p();
            let ln_rate_next = (p.alpha * i_integral(p.r, n + 1, p.alpha, quad)?).ln_1p();
            let k = word_totals.len() as f64;
            let old: f64 = total_hist
                .iter()
                .map(|(&q, &count)| count as f64 * log_predictive_old_trait(q, n, 0, p.alpha, p.r))
                .sum();
            (TiltCache::Stable { ln_rate_n, ln_rate_next }, old - (p.c + k) * (ln_rate_next - ln_rate_n))
        }
        ModelKind::Nbga => {
            let p = fit.gamma_params()?;
            let void_increment = p.theta * (p.r / (1.0 + n as f64 * p.r)).ln_1p();
            let mut old = 0.0;
            for (&q, &count) in &total_hist {
                old += count as f64 * (log_j_integral(n + 1, q, p.r, quad)? - log_j_integral(n, q, p.r, quad)?);
            }
            (TiltCache::Gamma { void_increment }, old - void_increment)
        }
        other => return Err(Error::Config(format!("classifier supports nb-stsp and nbga, not {other}"))),
    };
    Ok(ClassModel { label, n_docs: n, fit, word_totals, empty_doc_log_predictive: empty, tilt })
}

impl TrainedClassifier {
    pub fn with_prior(mut self, prior: ClassPrior) -> Self {
        self.prior = prior;
        self
    }

    pub fn labels(&self) -> Vec<&str> {
        self.classes.iter().map(|c| c.label.as_str()).collect()
    }

    /// `ln m(train_j ∪ doc) − ln m(train_j)` for one class.
    pub fn log_predictive(&self, class: usize, doc: &Document, quad: &Quadrature) -> Result<f64> {
        let cm = &self.classes[class];
        let n = cm.n_docs;
        let mut new_counts: Vec<u64> = doc.oov_counts.iter().copied().filter(|&a| a > 0).collect();
        let mut old: Vec<(u64, u64)> = Vec::new();
        for (id, &a) in &doc.counts {
            match cm.word_totals.get(id) {
                Some(&q) => old.push((q, a)),
                None if a > 0 => new_counts.push(a),
                None => {}
            }
        }
        let k = cm.k_n() as f64;
        let big_k = new_counts.len() as f64;
        match (&cm.tilt, cm.fit.model) {
            (TiltCache::Stable { ln_rate_next, .. }, ModelKind::NbStsp) => {
                let p: StableParams = cm.fit.stable_params()?;
                let mut total = cm.empty_doc_log_predictive;
                for &(q, a) in &old {
                    total += log_predictive_old_trait(q, n, a, p.alpha, p.r)
                        - log_predictive_old_trait(q, n, 0, p.alpha, p.r);
                }
                if !new_counts.is_empty() {
                    total += -ln_gamma_diff(p.c + k, big_k) + big_k * (p.alpha.ln() - ln_rate_next);
                    let a0 = p.r * (n + 1) as f64 + 1.0;
                    for &b in &new_counts {
                        total += ln_beta(a0, b as f64 - p.alpha) + ln_nb_coef(b as f64, p.r);
                    }
                }
                Ok(total)
            }
            (TiltCache::Gamma { .. }, ModelKind::Nbga) => {
                let p: GammaProcParams = cm.fit.gamma_params()?;
                let mut total = cm.empty_doc_log_predictive;
                for &(q, a) in &old {
                    total += log_j_integral(n + 1, q + a, p.r, quad)? - log_j_integral(n + 1, q, p.r, quad)?
                        + ln_nb_coef(a as f64, p.r);
                }
                total += big_k * p.theta.ln();
                for &b in &new_counts {
                    total += log_j_integral(n + 1, b, p.r, quad)? + ln_nb_coef(b as f64, p.r);
                }
                Ok(total)
            }
            _ => Err(Error::Config("class model and cached quantities disagree".into())),
        }
    }

    /// Class-assignment probabilities of one document.
    pub fn classify(&self, doc: &Document) -> Result<Vec<f64>> {
        self.classify_with_quadrature(doc, &Quadrature::default())
    }

    pub fn classify_with_quadrature(&self, doc: &Document, quad: &Quadrature) -> Result<Vec<f64>> {
        let j = self.classes.len();
        if doc.is_empty() {
            log::warn!("empty document: returning uniform class probabilities");
            return Ok(vec![1.0 / j as f64; j]);
        }
        let total_docs: u64 = self.classes.iter().map(|c| c.n_docs).sum();
        let mut scores = (0..j)
            .map(|c| {
                let prior = match self.prior {
                    ClassPrior::Uniform => 0.0,
                    ClassPrior::Empirical => (self.classes[c].n_docs as f64 / total_docs as f64).ln(),
                };
                Ok(self.log_predictive(c, doc, quad)? + prior)
            })
            .collect::<Result<Vec<f64>>>()?;
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical(format!("class log predictives are not finite: {scores:?}")));
        }
        let mut sum = 0.0;
        for s in &mut scores {
            *s = (*s - max).exp();
            sum += *s;
        }
        Ok(scores.into_iter().map(|s| s / sum).collect())
    }
}

/// Accuracy and assignment probabilities on a labelled test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// True class of each row of `probabilities`, in ascending order.
    pub labels: Vec<usize>,
    /// One row per test document (sorted by true class), one column per class.
    pub probabilities: Vec<Vec<f64>>,
    /// `confusion[true][predicted]` document counts.
    pub confusion: Vec<Vec<u64>>,
}

/// Classifies every test document (in parallel) and scores the argmax
/// assignment against the labels.
pub fn evaluate(clf: &TrainedClassifier, test: &[(usize, Document)]) -> Result<Evaluation> {
    let j = clf.classes.len();
    if let Some((label, _)) = test.iter().find(|(label, _)| *label >= j) {
        return Err(Error::Data(format!("test label {label} is not one of the {j} classes")));
    }
    let mut order: Vec<usize> = (0..test.len()).collect();
    order.sort_by_key(|&i| test[i].0);
    let quad = Quadrature::default();
    let probabilities = order
        .par_iter()
        .map(|&i| clf.classify_with_quadrature(&test[i].1, &quad))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = order.iter().map(|&i| test[i].0).collect();
    let mut confusion = vec![vec![0u64; j]; j];
    let mut correct = 0usize;
    for (row, &label) in probabilities.iter().zip(&labels) {
        let predicted = argmax(row);
        confusion[label][predicted] += 1;
        correct += usize::from(predicted == label);
    }
    let accuracy = if test.is_empty() { 0.0 } else { correct as f64 / test.len() as f64 };
    Ok(Evaluation { accuracy, labels, probabilities, confusion })
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}

/// Settings of the synthetic multi-class corpus generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusConfig {
    pub n_classes: usize,
    /// Words shared by all classes, with Zipf-like base rates.
    pub shared_words: usize,
    /// Words per class whose rate is boosted in that class only.
    pub class_words: usize,
    /// Rate multiplier of a class's own words.
    pub boost: f64,
    /// Expected number of in-vocabulary tokens per document.
    pub doc_length: f64,
    pub train_docs: Vec<usize>,
    pub test_docs: usize,
    /// Expected number of fresh words per document of each class: words
    /// drawn from an unbounded pool, so each occurs in a single document and
    /// every fresh word of a test document is out of vocabulary.
    pub fresh_words: Vec<f64>,
    pub seed: u64,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        SyntheticCorpusConfig {
            n_classes: 3,
            shared_words: 100,
            class_words: 100,
            boost: 4.0,
            doc_length: 60.0,
            train_docs: vec![100, 100, 100],
            test_docs: 60,
            fresh_words: vec![0.0; 3],
            seed: 0,
        }
    }
}

/// Synthetic training corpus plus labelled test documents.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub train: Corpus,
    pub test: Vec<(usize, Document)>,
}

// Mean of the count of a fresh word beyond its first occurrence.
const FRESH_EXTRA_MEAN: f64 = 0.5;

// Rank offset of the class-block base rates, so block words are mid-frequency.
const CLASS_BLOCK_OFFSET: usize = 10;

/// Generates a corpus whose classes share a vocabulary with partially
/// overlapping emphasis: shared word `w` has a Zipf base rate `1/(w+1)`, the
/// `i`-th word of every class block has base rate `1/(i+11)`, and each class
/// multiplies the rates of its own block by `boost`. Word counts are
/// Poisson. Documents may also carry fresh words that occur nowhere else;
/// in test documents these are out of vocabulary for every class.
pub fn synthetic_corpus(cfg: &SyntheticCorpusConfig) -> Result<SyntheticCorpus> {
    if cfg.n_classes == 0 || cfg.train_docs.len() != cfg.n_classes || cfg.fresh_words.len() != cfg.n_classes {
        return Err(Error::Config("train_docs and fresh_words must list one value per class".into()));
    }
    let vocab = cfg.shared_words + cfg.n_classes * cfg.class_words;
    let rates: Vec<Vec<f64>> = (0..cfg.n_classes)
        .map(|j| {
            let mut w: Vec<f64> = (0..vocab)
                .map(|v| match v.checked_sub(cfg.shared_words) {
                    None => 1.0 / (v + 1) as f64,
                    Some(b) => 1.0 / (b % cfg.class_words + 1 + CLASS_BLOCK_OFFSET) as f64,
                })
                .collect();
            let own = cfg.shared_words + j * cfg.class_words;
            for rate in &mut w[own..own + cfg.class_words] {
                *rate *= cfg.boost;
            }
            let total: f64 = w.iter().sum();
            w.iter().map(|x| x * cfg.doc_length / total).collect()
        })
        .collect();
    let seed = RngSeed::new(cfg.seed);
    let sample_doc = |j: usize, rng: &mut crate::distributions::StspRng| -> Result<(Document, Vec<u64>)> {
        let mut doc = Document::default();
        for (v, &lambda) in rates[j].iter().enumerate() {
            let a = poisson(lambda, rng)?;
            if a > 0 {
                doc.counts.insert(v, a);
            }
        }
        let fresh = (0..poisson(cfg.fresh_words[j], rng)?)
            .map(|_| Ok(1 + poisson(FRESH_EXTRA_MEAN, rng)?))
            .collect::<Result<Vec<_>>>()?;
        Ok((doc, fresh))
    };
    let mut next_fresh = vocab;
    let mut documents = Vec::with_capacity(cfg.n_classes);
    for j in 0..cfg.n_classes {
        let mut rng = seed.stream(j as u64);
        let mut docs = Vec::with_capacity(cfg.train_docs[j]);
        for _ in 0..cfg.train_docs[j] {
            let (mut doc, fresh) = sample_doc(j, &mut rng)?;
            for a in fresh {
                doc.counts.insert(next_fresh, a);
                next_fresh += 1;
            }
            docs.push(doc);
        }
        documents.push(docs);
    }
    let mut test = Vec::new();
    let mut rng = seed.stream(u64::MAX);
    for i in 0..cfg.test_docs {
        let j = i % cfg.n_classes;
        let (mut doc, fresh) = sample_doc(j, &mut rng)?;
        doc.oov_counts = fresh;
        test.push((j, doc));
    }
    let classes = (0..cfg.n_classes).map(|j| format!("class{j}")).collect();
    Ok(SyntheticCorpus { train: Corpus::new(classes, documents)?, test })
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::Domain(format!("Poisson mean {mean}: {e}")))?;
    Ok(d.sample(rng) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Hello, WORLD! 42 b2b x-ray"), vec!["hello", "world", "b2b", "x", "ray"]);
        assert!(tokenize("  123 ... ").is_empty());
    }

    #[test]
    fn vocabulary_thresholds() {
        let docs: Vec<Vec<&str>> = vec![vec!["the", "cat", "sat"], vec!["cat", "dog"], vec!["dog", "cat", "emu"]];
        let stop = parse_stopwords("# comment\nthe\n\n");
        let v = build_vocab(&docs, &stop, 1).unwrap();
        assert_eq!(v.tokens(), &["cat", "sat", "dog", "emu"]);
        let v = build_vocab(&docs, &stop, 3).unwrap();
        assert_eq!(v.tokens(), &["cat"]);
        assert_eq!(v.doc_freq(), &[3]);
        assert!(build_vocab(&docs, &stop, 4).is_err());
        let doc = v.document(&["cat", "the", "cat", "yak", "yak", "zebu"]);
        assert_eq!(doc.counts, BTreeMap::from([(0, 2)]));
        assert_eq!(doc.oov_counts, vec![2, 1]);
    }

    #[test]
    fn default_stopwords_load() {
        let stop = parse_stopwords(DEFAULT_STOPWORDS);
        assert!(stop.contains("the") && stop.contains("because"));
        assert!(!stop.contains("cat"));
    }

    #[test]
    fn synthetic_corpus_shape() {
        let cfg = SyntheticCorpusConfig { fresh_words: vec![3.0, 0.0, 0.0], ..Default::default() };
        let c = synthetic_corpus(&cfg).unwrap();
        assert_eq!(c.train.documents.iter().map(Vec::len).collect::<Vec<_>>(), vec![100, 100, 100]);
        assert_eq!(c.test.len(), 60);
        assert!(c.test.iter().any(|(_, d)| !d.oov_counts.is_empty()));
        assert!(c.test.iter().all(|(j, d)| *j == 0 || d.oov_counts.is_empty()));
        assert!(c.train.documents[0].iter().any(|d| d.counts.keys().any(|&v| v >= 400)));
        assert_eq!(synthetic_corpus(&cfg).unwrap(), c);
    }
}
