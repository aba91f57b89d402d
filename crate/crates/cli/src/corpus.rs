//! Loading labelled text collections for the classifier.
//!
//! Two layouts are supported: a directory with one sub-directory of text
//! files per class, or a CSV of token counts with columns
//! `doc_id,class,token,count`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use stsp_core::classifier::{tokenize, Document, Vocabulary};

use crate::CliError;

/// A document as token counts, before vocabulary mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDoc {
    pub id: String,
    pub class: String,
    pub counts: BTreeMap<String, u64>,
}

impl RawDoc {
    /// Maps the tokens onto `vocab`: stopwords are dropped and the remaining
    /// unknown tokens become out-of-vocabulary counts.
    pub fn to_document(&self, vocab: &Vocabulary) -> Document {
        let mut doc = Document::default();
        for (token, &count) in &self.counts {
            if count == 0 {
                continue;
            }
            match vocab.id(token) {
                Some(id) => {
                    doc.counts.insert(id, count);
                }
                None if vocab.is_stopword(token) => {}
                None => doc.oov_counts.push(count),
            }
        }
        doc
    }

    /// Distinct tokens, as used to build the vocabulary.
    pub fn tokens(&self) -> Vec<&str> {
        self.counts.iter().filter(|(_, &c)| c > 0).map(|(t, _)| t.as_str()).collect()
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| CliError::io(dir, e)))
        .collect::<Result<Vec<_>, _>>()?;
    paths.sort();
    Ok(paths)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Reads `dir/<class>/<file>` documents. Hidden entries are skipped.
pub fn read_class_dirs(dir: &Path) -> Result<Vec<RawDoc>, CliError> {
    let mut docs = Vec::new();
    for class_dir in sorted_entries(dir)? {
        let class = file_name(&class_dir);
        if !class_dir.is_dir() || class.starts_with('.') {
            continue;
        }
        for path in sorted_entries(&class_dir)? {
            let name = file_name(&path);
            if !path.is_file() || name.starts_with('.') {
                continue;
            }
            let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            let mut counts = BTreeMap::new();
            for token in tokenize(&String::from_utf8_lossy(&bytes)) {
                *counts.entry(token).or_insert(0) += 1;
            }
            docs.push(RawDoc { id: format!("{class}/{name}"), class: class.clone(), counts });
        }
    }
    if docs.is_empty() {
        return Err(CliError::Config(format!("{}: no documents found", dir.display())));
    }
    Ok(docs)
}

#[derive(Debug, Deserialize)]
struct CountRow {
    doc_id: String,
    class: String,
    token: String,
    count: u64,
}

/// Reads a token-count CSV. Tokens are lowercased; documents keep the order
/// in which they first appear.
pub fn read_count_csv(path: &Path) -> Result<Vec<RawDoc>, CliError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut docs: Vec<RawDoc> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: CountRow = row?;
        let slot = *index.entry(row.doc_id.clone()).or_insert_with(|| {
            docs.push(RawDoc { id: row.doc_id.clone(), class: row.class.clone(), counts: BTreeMap::new() });
            docs.len() - 1
        });
        let doc = &mut docs[slot];
        if doc.class != row.class {
            return Err(CliError::Config(format!(
                "{}: document {} is labelled both {} and {}",
                path.display(),
                row.doc_id,
                doc.class,
                row.class
            )));
        }
        *doc.counts.entry(row.token.to_lowercase()).or_insert(0) += row.count;
    }
    if docs.is_empty() {
        return Err(CliError::Config(format!("{}: no documents found", path.display())));
    }
    Ok(docs)
}

/// Sorted class labels of the training documents.
pub fn class_labels(docs: &[RawDoc]) -> Vec<String> {
    docs.iter().map(|d| d.class.clone()).collect::<BTreeSet<_>>().into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use stsp_core::classifier::build_vocab;

    #[test]
    fn documents_split_known_stopword_and_unknown_tokens() {
        let train = RawDoc {
            id: "a".into(),
            class: "x".into(),
            counts: BTreeMap::from([("apple".to_string(), 2), ("the".to_string(), 4)]),
        };
        let stop = BTreeSet::from(["the".to_string()]);
        let vocab = build_vocab(&[train.tokens()], &stop, 1).unwrap();
        let test = RawDoc {
            id: "b".into(),
            class: "x".into(),
            counts: BTreeMap::from([("apple".to_string(), 1), ("the".to_string(), 3), ("pear".to_string(), 5)]),
        };
        let doc = test.to_document(&vocab);
        assert_eq!(doc.counts, BTreeMap::from([(0, 1)]));
        assert_eq!(doc.oov_counts, vec![5]);
    }
}
