//! Label files: ivecs with one value per record, or one integer per text line.
//!
//! Raw labels are remapped to a dense `[0, C)` alphabet in ascending raw order.

use std::fs;
use std::path::Path;

use crate::error::{format_err, Result};
use crate::types::LabelVector;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedLabels {
    pub labels: LabelVector,
    /// `alphabet[dense] = raw`.
    pub alphabet: Vec<u64>,
}

impl LoadedLabels {
    pub fn raw(&self, dense: usize) -> u64 {
        self.alphabet[dense]
    }
}

fn densify(raw: Vec<u64>) -> LoadedLabels {
    let mut alphabet = raw.clone();
    alphabet.sort_unstable();
    alphabet.dedup();
    let labels = raw
        .iter()
        .map(|v| alphabet.binary_search(v).unwrap())
        .collect();
    LoadedLabels {
        labels: LabelVector::new(labels, alphabet.len()).unwrap(),
        alphabet,
    }
}

pub fn parse_label_text(text: &str) -> Result<LoadedLabels> {
    let mut raw = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if !t.is_empty() {
            let v: i64 = t
                .parse()
                .map_err(|_| format_err(offset, format!("not an integer label: '{t}'")))?;
            if v < 0 {
                return Err(format_err(offset, format!("negative label {v}")));
            }
            raw.push(v as u64);
        }
        offset += line.len() as u64;
    }
    Ok(densify(raw))
}

pub fn parse_label_ivecs(bytes: &[u8]) -> Result<LoadedLabels> {
    let records = super::vecs::parse_ivecs(bytes)?;
    let mut raw = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        // one 8-byte record per label
        let offset = (i * 8) as u64;
        if r.len() != 1 {
            return Err(format_err(offset, format!("label record has {} values, expected 1", r.len())));
        }
        if r[0] < 0 {
            return Err(format_err(offset, format!("negative label {}", r[0])));
        }
        raw.push(r[0] as u64);
    }
    Ok(densify(raw))
}

/// Loads `.ivecs` by extension, anything else as text.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LoadedLabels> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if path.extension().is_some_and(|e| e == "ivecs") {
        parse_label_ivecs(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|e| format_err(e.utf8_error().valid_up_to() as u64, "label file is not UTF-8"))?;
        parse_label_text(&text)
    }
}

pub fn save_labels_text(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}
