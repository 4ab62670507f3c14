//! Dataset ingestion, manifests and synthetic data.

pub mod labels;
pub mod manifest;
pub mod synthetic;
pub mod vecs;

use std::fs;
use std::path::Path;

pub use labels::{load_labels, save_labels_text, LoadedLabels};
pub use manifest::DatasetManifest;
pub use synthetic::{generate_synthetic, generate_synthetic_dataset, SyntheticSpec};
pub use vecs::{load_fvecs, load_ivecs, save_fvecs, save_ivecs};

use rand::seq::SliceRandom;

use crate::error::{format_err, shape, Error, Result};
use crate::seed::rng;
use crate::types::{FeatureMatrix, LabelVector};

/// Features, labels and an optional train/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: FeatureMatrix,
    pub labels: LabelVector,
    /// `true` marks a test (query) item.
    pub test_mask: Option<Vec<bool>>,
}

impl Dataset {
    pub fn new(
        name: String,
        features: FeatureMatrix,
        labels: LabelVector,
        test_mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(shape(format!(
                "{} feature rows for {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(m) = &test_mask {
            if m.len() != labels.len() {
                return Err(shape(format!("split mask has {} entries for {} items", m.len(), labels.len())));
            }
        }
        Ok(Self {
            name,
            features,
            labels,
            test_mask,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.num_classes()
    }

    /// `(train, test)` indices. Without a stored split, a seeded per-class
    /// split holds out `round(test_fraction · n_c)` items of each class.
    pub fn train_test(&self, seed: u64, test_fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
        if let Some(mask) = &self.test_mask {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..self.len()).partition(|&i| mask[i]);
            return Ok((train, test));
        }
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::Config(format!("test fraction {test_fraction} outside [0, 1)")));
        }
        let mut r = rng(seed);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for mut group in self.labels.indices_by_class() {
            group.shuffle(&mut r);
            let k = (group.len() as f64 * test_fraction).round() as usize;
            test.extend_from_slice(&group[..k]);
            train.extend_from_slice(&group[k..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok((train, test))
    }

    /// Writes `<stem>.fvecs`, `<stem>.labels.txt`, an optional `<stem>.split.txt`
    /// and `<stem>.manifest` (with checksum) into `dir`. Returns the manifest path.
    pub fn write_with_manifest(&self, dir: &Path, stem: &str) -> Result<std::path::PathBuf> {
        fs::create_dir_all(dir)?;
        let features = dir.join(format!("{stem}.fvecs"));
        let labels = dir.join(format!("{stem}.labels.txt"));
        save_fvecs(&features, &self.features)?;
        save_labels_text(&labels, self.labels.as_slice())?;
        let split = match &self.test_mask {
            Some(mask) => {
                let p = dir.join(format!("{stem}.split.txt"));
                let flags: Vec<usize> = mask.iter().map(|&m| usize::from(m)).collect();
                save_labels_text(&p, &flags)?;
                Some(p)
            }
            None => None,
        };
        let mut manifest = DatasetManifest {
            name: self.name.clone(),
            features,
            format: "fvecs".into(),
            labels,
            split,
            n: self.len(),
            d: self.features.cols(),
            c: self.num_classes(),
            checksum: None,
        };
        manifest.checksum = Some(manifest.compute_checksum()?);
        let path = dir.join(format!("{stem}.manifest"));
        manifest.save(&path)?;
        Ok(path)
    }
}

/// Reads a text file of 0/1 flags, one per item.
pub fn load_split_mask(path: &Path, n: usize) -> Result<Vec<bool>> {
    let text = fs::read_to_string(path)?;
    let mut mask = Vec::with_capacity(n);
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        match line.trim() {
            "" => {}
            "0" => mask.push(false),
            "1" => mask.push(true),
            other => return Err(format_err(offset, format!("split flag must be 0 or 1, got '{other}'"))),
        }
        offset += line.len() as u64;
    }
    if mask.len() != n {
        return Err(Error::Data(format!("split file has {} flags for {n} items", mask.len())));
    }
    Ok(mask)
}
