//! Flat `key = value` dataset manifests.
//!
//! ```text
//! name = cifar10-gist
//! features = gist.fvecs
//! format = fvecs
//! labels = labels.txt
//! split = split.txt        # optional, 1 marks a query/test item
//! n = 60000
//! d = 512
//! c = 10
//! checksum = <sha256 hex of features ‖ labels ‖ split bytes>
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::labels::load_labels;
use super::vecs::load_fvecs;
use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: String,
    pub features: PathBuf,
    pub format: String,
    pub labels: PathBuf,
    pub split: Option<PathBuf>,
    pub n: usize,
    pub d: usize,
    pub c: usize,
    pub checksum: Option<String>,
}

impl DatasetManifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut name = None;
        let mut features = None;
        let mut format = None;
        let mut labels = None;
        let mut split = None;
        let mut n = None;
        let mut d = None;
        let mut c = None;
        let mut checksum = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("manifest line {}: expected 'key = value'", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim().to_string());
            let int = |v: &str| {
                v.parse::<usize>().map_err(|_| {
                    Error::Config(format!("manifest line {}: '{key}' must be an integer", lineno + 1))
                })
            };
            match key {
                "name" => name = Some(value),
                "features" => features = Some(base_dir.join(value)),
                "format" => format = Some(value),
                "labels" => labels = Some(base_dir.join(value)),
                "split" => split = Some(base_dir.join(value)),
                "n" => n = Some(int(&value)?),
                "d" => d = Some(int(&value)?),
                "c" => c = Some(int(&value)?),
                "checksum" => checksum = Some(value.to_ascii_lowercase()),
                other => {
                    return Err(Error::Config(format!(
                        "manifest line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        let missing = |k: &str| Error::Config(format!("manifest is missing '{k}'"));
        let format = format.unwrap_or_else(|| "fvecs".into());
        if format != "fvecs" {
            return Err(Error::Config(format!("unsupported feature format '{format}'")));
        }
        Ok(Self {
            name: name.ok_or_else(|| missing("name"))?,
            features: features.ok_or_else(|| missing("features"))?,
            format,
            labels: labels.ok_or_else(|| missing("labels"))?,
            split,
            n: n.ok_or_else(|| missing("n"))?,
            d: d.ok_or_else(|| missing("d"))?,
            c: c.ok_or_else(|| missing("c"))?,
            checksum,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Serializes with paths relative to `base_dir` when possible.
    pub fn to_text(&self, base_dir: &Path) -> String {
        let rel = |p: &Path| {
            p.strip_prefix(base_dir)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        let mut s = String::new();
        writeln!(s, "name = {}", self.name).unwrap();
        writeln!(s, "features = {}", rel(&self.features)).unwrap();
        writeln!(s, "format = {}", self.format).unwrap();
        writeln!(s, "labels = {}", rel(&self.labels)).unwrap();
        if let Some(split) = &self.split {
            writeln!(s, "split = {}", rel(split)).unwrap();
        }
        writeln!(s, "n = {}", self.n).unwrap();
        writeln!(s, "d = {}", self.d).unwrap();
        writeln!(s, "c = {}", self.c).unwrap();
        if let Some(sum) = &self.checksum {
            writeln!(s, "checksum = {sum}").unwrap();
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text(path.parent().unwrap_or(Path::new("."))))?;
        Ok(())
    }

    fn files(&self) -> Vec<&Path> {
        let mut v = vec![self.features.as_path(), self.labels.as_path()];
        if let Some(s) = &self.split {
            v.push(s);
        }
        v
    }

    /// SHA-256 over the referenced files, concatenated in manifest order.
    pub fn compute_checksum(&self) -> Result<String> {
        let mut h = Sha256::new();
        for f in self.files() {
            h.update(fs::read(f)?);
        }
        Ok(hex::encode(h.finalize()))
    }

    pub fn verify_checksum(&self) -> Result<()> {
        if let Some(expected) = &self.checksum {
            let actual = self.compute_checksum()?;
            if &actual != expected {
                return Err(Error::ChecksumMismatch {
                    path: self.features.clone(),
                    expected: expected.clone(),
                    actual,
                });
            }
        }
        Ok(())
    }

    /// Verifies the checksum, loads every file and checks declared shapes.
    pub fn load_dataset(&self) -> Result<Dataset> {
        self.verify_checksum()?;
        let features = load_fvecs(&self.features)?;
        let labels = load_labels(&self.labels)?.labels;
        let mismatch = |what: &str, declared: usize, actual: usize| {
            Error::Data(format!("manifest declares {what} = {declared}, files have {actual}"))
        };
        if features.rows() != self.n {
            return Err(mismatch("n", self.n, features.rows()));
        }
        if features.cols() != self.d {
            return Err(mismatch("d", self.d, features.cols()));
        }
        if labels.len() != self.n {
            return Err(mismatch("n (labels)", self.n, labels.len()));
        }
        if labels.num_classes() != self.c {
            return Err(mismatch("c", self.c, labels.num_classes()));
        }
        let test_mask = match &self.split {
            Some(p) => Some(super::load_split_mask(p, self.n)?),
            None => None,
        };
        Dataset::new(self.name.clone(), features, labels, test_mask)
    }
}
