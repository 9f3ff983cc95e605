//! JSONL corpus records and line-oriented I/O.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::molhallu::ScoringSample;

/// One line of a corpus file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    #[serde(default)]
    pub smiles: String,
    #[serde(default)]
    pub question: String,
    pub answer_gt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_pred: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl CorpusRecord {
    /// `None` when the record has no prediction to score.
    pub fn to_sample(&self) -> Option<ScoringSample> {
        Some(ScoringSample {
            id: self.id.clone(),
            smiles: self.smiles.clone(),
            question: self.question.clone(),
            answer_pred: self.answer_pred.clone()?,
            answer_gt: self.answer_gt.clone(),
            description: self.description.clone().unwrap_or_default(),
        })
    }
}

/// Parse every non-blank line of a JSONL file.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        let line = serde_json::to_string(row).expect("corpus rows serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Ids must be unique and ground-truth answers non-blank.
pub fn validate_corpus(records: &[CorpusRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Invalid(format!("record {}: duplicate id {:?}", i + 1, r.id)));
        }
        if r.answer_gt.trim().is_empty() {
            return Err(Error::Invalid(format!("record {} ({}): empty answer_gt", i + 1, r.id)));
        }
    }
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>> {
    let records: Vec<CorpusRecord> = read_jsonl(path)?;
    validate_corpus(&records)?;
    Ok(records)
}
