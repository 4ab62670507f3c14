//! Retrieval of classes never seen while the codec was trained.
//!
//! Per fold the codec is fitted on the known-class training items, the
//! database is the held-out-class training set and the queries are the
//! held-out-class test items.

use super::map_over_queries;
use super::report::{ProtocolReport, RunRecord};
use super::splits::{ClassSplit, SplitSets};
use crate::codecs::{CodecSpec, PqCodebook, TightFrame};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::retrieval::{rank_hamming, rank_inner_product, rank_l2, DatabaseRepresentation};
use crate::seed::derive_seed;
use crate::types::FeatureMatrix;

/// Similarity used for uncompressed features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnseenMetric {
    #[default]
    L2,
    InnerProduct,
}

impl std::str::FromStr for UnseenMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(UnseenMetric::L2),
            "ip" | "inner-product" => Ok(UnseenMetric::InnerProduct),
            other => Err(Error::Config(format!("unknown metric '{other}' (l2, ip)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnseenConfig {
    pub seed: u64,
    /// Per-class test share when the dataset carries no split.
    pub test_fraction: f64,
    pub map_k: Option<usize>,
    pub metric: UnseenMetric,
}

impl Default for UnseenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            test_fraction: 1.0 / 6.0,
            map_k: None,
            metric: UnseenMetric::L2,
        }
    }
}

pub(crate) fn column_mean(x: &FeatureMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = x.rows().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Train/test partition followed by the class split of every fold.
pub(crate) fn fold_sets(
    dataset: &Dataset,
    splits: &[ClassSplit],
    seed: u64,
    test_fraction: f64,
) -> Result<Vec<SplitSets>> {
    if splits.is_empty() {
        return Err(Error::Config("no class splits given".into()));
    }
    let c = dataset.num_classes();
    for s in splits {
        if s.num_classes() != c {
            return Err(Error::Config(format!(
                "class split covers {} classes, dataset has {c}",
                s.num_classes()
            )));
        }
    }
    let (train, test) = dataset.train_test(derive_seed(seed, "train-test", 0), test_fraction)?;
    Ok(splits
        .iter()
        .map(|s| s.partition(&dataset.labels, &train, &test))
        .collect())
}

/// A codec fitted on known-class data.
pub(crate) enum FittedCodec {
    Raw,
    Pq(PqCodebook),
    Lsh(TightFrame),
}

impl FittedCodec {
    pub(crate) fn fit(spec: CodecSpec, train: &FeatureMatrix, seed: u64) -> Result<Self> {
        Ok(match spec {
            CodecSpec::None => FittedCodec::Raw,
            CodecSpec::Pq { m, ks } => FittedCodec::Pq(PqCodebook::train(train, m, ks, seed)?),
            CodecSpec::Lsh { bits } => {
                FittedCodec::Lsh(TightFrame::new(train.cols(), bits, seed)?.with_center(column_mean(train))?)
            }
        })
    }
}

pub fn run_protocol1(
    dataset: &Dataset,
    splits: &[ClassSplit],
    codec: CodecSpec,
    config: &UnseenConfig,
) -> Result<ProtocolReport> {
    let sets = fold_sets(dataset, splits, config.seed, config.test_fraction)?;
    let mut records = Vec::with_capacity(sets.len());
    for (split, s) in splits.iter().zip(&sets) {
        if s.train75.is_empty() || s.train25.is_empty() || s.test25.is_empty() {
            return Err(Error::InsufficientData(format!(
                "fold {}: train75={}, train25={}, test25={} items",
                split.fold,
                s.train75.len(),
                s.train25.len(),
                s.test25.len()
            )));
        }
        let x_fit = dataset.features.select_rows(&s.train75);
        let x_db = dataset.features.select_rows(&s.train25);
        let x_q = dataset.features.select_rows(&s.test25);
        let y_db = dataset.labels.select(&s.train25);
        let y_q = dataset.labels.select(&s.test25);
        let k = config.map_k.unwrap_or(x_db.rows());
        if k == 0 || k > x_db.rows() {
            return Err(Error::Config(format!("mAP cutoff k={k} outside [1, {}]", x_db.rows())));
        }
        let fitted = FittedCodec::fit(codec, &x_fit, derive_seed(config.seed, "codec", split.fold as u64))?;
        let result = match fitted {
            FittedCodec::Raw => {
                let db = DatabaseRepresentation::RawFeatures(x_db);
                map_over_queries(y_q.as_slice(), y_db.as_slice(), k, |qi| match config.metric {
                    UnseenMetric::L2 => rank_l2(x_q.row(qi), &db),
                    UnseenMetric::InnerProduct => rank_inner_product(x_q.row(qi), &db),
                })?
            }
            FittedCodec::Pq(codebook) => {
                let codes = codebook.encode_all(&x_db)?;
                let db = DatabaseRepresentation::PqCodes { codebook, codes };
                map_over_queries(y_q.as_slice(), y_db.as_slice(), k, |qi| rank_l2(x_q.row(qi), &db))?
            }
            FittedCodec::Lsh(frame) => {
                let db = DatabaseRepresentation::BinaryCodes {
                    codes: frame.encode_all(&x_db)?,
                    bits: frame.bits(),
                };
                let q_codes = frame.encode_all(&x_q)?;
                map_over_queries(y_q.as_slice(), y_db.as_slice(), k, |qi| rank_hamming(&q_codes[qi], &db))?
            }
        };
        log::debug!("protocol 1 fold {}: mAP {:.4}", split.fold, result.value);
        records.push(RunRecord {
            fold: Some(split.fold),
            run: 0,
            value: result.value,
            accuracy: None,
        });
    }
    let method = match (codec, config.metric) {
        (CodecSpec::None, UnseenMetric::L2) => "none (L2)".to_string(),
        (CodecSpec::None, UnseenMetric::InnerProduct) => "none (inner product)".to_string(),
        (c, _) => c.to_string(),
    };
    Ok(ProtocolReport::new(
        "unseen",
        &dataset.name,
        &method,
        "mAP",
        None,
        None,
        codec.code_size_bits(),
        records,
        vec![
            ("seed".into(), config.seed.to_string()),
            ("split_seed".into(), splits[0].seed.to_string()),
            ("codec".into(), codec.to_string()),
            ("test_fraction".into(), config.test_fraction.to_string()),
            ("map_k".into(), config.map_k.map_or("N".into(), |k| k.to_string())),
        ],
    ))
}
