//! Sparse trait CSV files and JSON manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use stsp_core::stsp::{ScoreKind, TraitDataset};

use crate::CliError;

/// Version tag written into every manifest.
pub const MANIFEST_VERSION: u32 = 1;

/// File name of the dataset manifest written next to a simulated dataset.
pub const DATASET_MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
struct TraitRow {
    obs_id: usize,
    trait_id: String,
    score: String,
}

/// Dataset description stored alongside a trait CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub n_obs: usize,
    pub n_traits: usize,
    pub n_entries: usize,
    pub score_kind: ScoreKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DatasetManifest {
    pub fn describe(data: &TraitDataset) -> Self {
        DatasetManifest {
            version: MANIFEST_VERSION,
            n_obs: data.n_obs,
            n_traits: data.n_traits(),
            n_entries: data.traits.iter().map(|t| t.entries.len()).sum(),
            score_kind: data.score_kind,
            generator: None,
            seed: None,
        }
    }
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn format_score(score: f64, kind: ScoreKind) -> String {
    match kind {
        ScoreKind::Count | ScoreKind::Binary => format!("{}", score.round() as i64),
        ScoreKind::Real => format!("{score:?}"),
    }
}

/// Writes `obs_id,trait_id,score` rows ordered by observation and then by
/// trait order in the dataset.
pub fn write_dataset(path: &Path, data: &TraitDataset) -> Result<(), CliError> {
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for (t, record) in data.traits.iter().enumerate() {
        rows.extend(record.entries.iter().map(|(&i, &y)| (i, t, y)));
    }
    rows.sort_by_key(|&(i, t, _)| (i, t));
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    writer.write_record(["obs_id", "trait_id", "score"])?;
    for (i, t, y) in rows {
        writer.serialize(TraitRow {
            obs_id: i,
            trait_id: data.traits[t].trait_id.clone(),
            score: format_score(y, data.score_kind),
        })?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Manifest in the same directory as `csv_path`, if any.
pub fn sibling_manifest(csv_path: &Path) -> Result<Option<DatasetManifest>, CliError> {
    let path: PathBuf = csv_path.parent().unwrap_or(Path::new(".")).join(DATASET_MANIFEST);
    if path.is_file() {
        Ok(Some(read_json(&path)?))
    } else {
        Ok(None)
    }
}

/// Reads a trait CSV. The number of observations and the score kind come
/// from the arguments, else from a sibling manifest, else from the largest
/// observation id and the count default.
pub fn read_dataset(path: &Path, n_obs: Option<usize>, kind: Option<ScoreKind>) -> Result<TraitDataset, CliError> {
    let manifest = sibling_manifest(path)?;
    let kind = kind.or(manifest.as_ref().map(|m| m.score_kind)).unwrap_or(ScoreKind::Count);
    let mut reader = csv::Reader::from_path(path)?;
    let mut triples = Vec::new();
    for row in reader.deserialize() {
        let row: TraitRow = row?;
        let score: f64 = row
            .score
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{}: score {:?} is not a number", path.display(), row.score)))?;
        triples.push((row.obs_id, row.trait_id, score));
    }
    let max_obs = triples.iter().map(|t| t.0 + 1).max().unwrap_or(0);
    let n_obs = match n_obs.or(manifest.map(|m| m.n_obs)) {
        Some(n) => n,
        None => {
            log::warn!("{}: no observation count given, using {max_obs}", path.display());
            max_obs
        }
    };
    if max_obs > n_obs {
        return Err(CliError::Config(format!(
            "{}: observation id {} exceeds the observation count {n_obs}",
            path.display(),
            max_obs - 1
        )));
    }
    Ok(TraitDataset::from_triples(n_obs, kind, triples)?)
}
