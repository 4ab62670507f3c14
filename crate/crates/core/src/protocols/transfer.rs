//! Transfer learning from compressed features: a new classifier is trained on
//! reconstructed held-out-class items and scored on the uncompressed
//! held-out-class test items.

use super::report::{ProtocolReport, RunRecord};
use super::splits::ClassSplit;
use super::unseen::{fold_sets, FittedCodec};
use crate::classifier::cv::cross_validate_with;
use crate::classifier::{default_lambda_grid, train_head, HeadConfig, LbfgsOptions, ProbabilisticClassifier};
use crate::codecs::CodecSpec;
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::metrics::accuracy_of;
use crate::seed::derive_seed;
use crate::types::{FeatureMatrix, LabelVector};

#[derive(Debug, Clone, PartialEq)]
pub struct TransferConfig {
    pub seed: u64,
    /// Per-class test share when the dataset carries no split.
    pub test_fraction: f64,
    pub head: HeadConfig,
    pub lambda_grid: Vec<f64>,
    pub optimizer: LbfgsOptions,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            test_fraction: 1.0 / 6.0,
            head: HeadConfig::Linear,
            lambda_grid: default_lambda_grid(),
            optimizer: LbfgsOptions::default(),
        }
    }
}

fn head_name(head: HeadConfig) -> String {
    match head {
        HeadConfig::Linear => "linear".into(),
        HeadConfig::HiddenLayer { units } => format!("hidden:{units}"),
    }
}

/// Held-out labels re-indexed to `0..|held out|`.
fn dense_labels(split: &ClassSplit, labels: &LabelVector, items: &[usize]) -> Result<LabelVector> {
    let dense = items
        .iter()
        .map(|&i| split.held_out_index(labels.get(i)).expect("item of a held-out class"))
        .collect();
    LabelVector::new(dense, split.held_out_classes.len())
}

pub fn run_protocol2(
    dataset: &Dataset,
    splits: &[ClassSplit],
    codec: CodecSpec,
    config: &TransferConfig,
) -> Result<ProtocolReport> {
    if !codec.supports_decode() {
        return Err(Error::UnsupportedCodec(format!(
            "{codec} has no decoder; transfer learning needs reconstructed features"
        )));
    }
    if config.lambda_grid.is_empty() {
        return Err(Error::Config("empty regularization grid".into()));
    }
    let sets = fold_sets(dataset, splits, config.seed, config.test_fraction)?;
    let mut records = Vec::with_capacity(sets.len());
    for (split, s) in splits.iter().zip(&sets) {
        if s.train75.is_empty() || s.train25.len() < 2 || s.test25.is_empty() {
            return Err(Error::InsufficientData(format!(
                "fold {}: train75={}, train25={}, test25={} items",
                split.fold,
                s.train75.len(),
                s.train25.len(),
                s.test25.len()
            )));
        }
        let fold_seed = derive_seed(config.seed, "fold", split.fold as u64);
        let x_fit = dataset.features.select_rows(&s.train75);
        let fitted = FittedCodec::fit(codec, &x_fit, derive_seed(config.seed, "codec", split.fold as u64))?;
        let reconstruct = |items: &[usize]| -> Result<FeatureMatrix> {
            let x = dataset.features.select_rows(items);
            match &fitted {
                FittedCodec::Raw => Ok(x),
                FittedCodec::Pq(cb) => cb.decode_all(&cb.encode_all(&x)?),
                FittedCodec::Lsh(_) => unreachable!("rejected above"),
            }
        };
        let x_train = reconstruct(&s.train25)?;
        let x_test = dataset.features.select_rows(&s.test25);
        let y_train = dense_labels(split, &dataset.labels, &s.train25)?;
        let y_test = dense_labels(split, &dataset.labels, &s.test25)?;

        let head_seed = derive_seed(fold_seed, "head", 0);
        let lambda = if config.lambda_grid.len() == 1 {
            config.lambda_grid[0]
        } else {
            cross_validate_with(&x_train, &y_train, &config.lambda_grid, derive_seed(fold_seed, "cv", 0), |x, y, l| {
                train_head(config.head, x, y, l, head_seed, config.optimizer)
            })?
            .chosen_lambda
        };
        let model = train_head(config.head, &x_train, &y_train, lambda, head_seed, config.optimizer)?;
        let accuracy = accuracy_of(model.predict(&x_test)?.as_slice(), y_test.as_slice())?;
        log::debug!("protocol 2 fold {}: λ={lambda} accuracy {accuracy:.4}", split.fold);
        records.push(RunRecord {
            fold: Some(split.fold),
            run: 0,
            value: accuracy,
            accuracy: None,
        });
    }
    let grid: Vec<String> = config.lambda_grid.iter().map(|l| l.to_string()).collect();
    Ok(ProtocolReport::new(
        "transfer",
        &dataset.name,
        &codec.to_string(),
        "accuracy",
        None,
        None,
        codec.code_size_bits(),
        records,
        vec![
            ("seed".into(), config.seed.to_string()),
            ("split_seed".into(), splits[0].seed.to_string()),
            ("codec".into(), codec.to_string()),
            ("head".into(), head_name(config.head)),
            ("test_fraction".into(), config.test_fraction.to_string()),
            ("lambda_grid".into(), grid.join(" ")),
        ],
    ))
}

/// `(bytes per image, mean accuracy)` points.
pub type Curve = Vec<(f64, f64)>;

/// Runs PQ with each `m` in turn; returns the reports and the accuracy curve.
pub fn transfer_curve(
    dataset: &Dataset,
    splits: &[ClassSplit],
    ms: &[usize],
    ks: usize,
    config: &TransferConfig,
) -> Result<(Vec<ProtocolReport>, Curve)> {
    let mut reports = Vec::with_capacity(ms.len());
    let mut points = Vec::with_capacity(ms.len());
    for &m in ms {
        let codec = CodecSpec::Pq { m, ks };
        let report = run_protocol2(dataset, splits, codec, config)?;
        let bits = codec.code_size_bits().expect("pq has a code size");
        points.push((bits as f64 / 8.0, report.mean));
        reports.push(report);
    }
    Ok((reports, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic_dataset, SyntheticSpec};
    use crate::protocols::make_class_splits;

    fn cfg() -> TransferConfig {
        TransferConfig {
            seed: 4,
            lambda_grid: vec![1e-3, 1e-1],
            ..TransferConfig::default()
        }
    }

    #[test]
    fn codec_free_transfer_learns() {
        let ds = generate_synthetic_dataset(&SyntheticSpec::new(8, 30, 6, 5.0, 7), "toy").unwrap();
        let splits = make_class_splits(8, 0).unwrap();
        let r = run_protocol2(&ds, &splits, CodecSpec::None, &cfg()).unwrap();
        assert_eq!(r.records.len(), 4);
        assert!(r.mean > 0.8, "{}", r.mean);
        assert_eq!(r.code_size_bits, None);
    }

    #[test]
    fn lsh_is_rejected() {
        let ds = generate_synthetic_dataset(&SyntheticSpec::new(8, 10, 4, 2.0, 7), "toy").unwrap();
        let splits = make_class_splits(8, 0).unwrap();
        assert!(matches!(
            run_protocol2(&ds, &splits, CodecSpec::Lsh { bits: 16 }, &cfg()),
            Err(Error::UnsupportedCodec(_))
        ));
    }

    #[test]
    fn curve_points_in_bytes() {
        let ds = generate_synthetic_dataset(&SyntheticSpec::new(8, 30, 8, 4.0, 7), "toy").unwrap();
        let splits = make_class_splits(8, 0).unwrap();
        let (reports, points) = transfer_curve(&ds, &splits, &[1, 2], 16, &cfg()).unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(points[0].0, 0.5);
        assert_eq!(points[1].0, 1.0);
    }

    #[test]
    fn hidden_head_runs() {
        let ds = generate_synthetic_dataset(&SyntheticSpec::new(8, 20, 4, 5.0, 3), "toy").unwrap();
        let splits = make_class_splits(8, 0).unwrap();
        let c = TransferConfig {
            head: HeadConfig::HiddenLayer { units: 8 },
            lambda_grid: vec![1e-2],
            ..cfg()
        };
        let r = run_protocol2(&ds, &splits, CodecSpec::None, &c).unwrap();
        assert!(r.mean > 0.5);
    }
}
