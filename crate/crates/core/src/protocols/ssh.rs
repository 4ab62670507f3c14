//! Supervised (SH) and semi-supervised (SSH) hashing evaluation with a
//! classifier: anchor features, softmax regression, then one of three
//! database encodings ranked against every query's posterior.

use rand::seq::SliceRandom;

use super::report::{ProtocolReport, RunRecord};
use super::map_over_queries;
use crate::classifier::{default_lambda_grid, fit_softmax_cv, GaussianAnchorMap, LbfgsOptions, ProbabilisticClassifier};
use crate::codecs::{bits_for_classes, TightFrame};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::metrics::accuracy_of;
use crate::retrieval::{rank_hamming, rank_onehot, rank_topline, DatabaseRepresentation, QueryRepresentation};
use crate::seed::{derive_seed, rng};
use crate::types::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SshStrategy {
    /// Store the class index (true label if labeled, argmax otherwise).
    OneHot,
    /// Store sign bits of a tight-frame projection of `u(x)`.
    Lsh,
    /// Store `u(x)` in full and rank by dot product.
    Topline,
}

impl SshStrategy {
    pub fn method_name(&self) -> &'static str {
        match self {
            SshStrategy::OneHot => "Classifier+one-hot",
            SshStrategy::Lsh => "Classifier+LSH",
            SshStrategy::Topline => "Classifier topline",
        }
    }
}

impl std::str::FromStr for SshStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "onehot" | "one-hot" => Ok(SshStrategy::OneHot),
            "lsh" => Ok(SshStrategy::Lsh),
            "topline" => Ok(SshStrategy::Topline),
            other => Err(Error::Config(format!("unknown strategy '{other}' (onehot, lsh, topline)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SshConfig {
    /// Labeled database items; `None` labels the whole database (SH).
    pub n_label: Option<usize>,
    /// Number of Gaussian anchors.
    pub h: usize,
    /// Held-out queries per class (ignored when the dataset carries a split).
    pub queries_per_class: usize,
    pub runs: usize,
    pub seed: u64,
    pub lsh_bits: usize,
    /// Subtract the uniform vector `1/C` before LSH projection.
    pub lsh_center: bool,
    pub lambda_grid: Vec<f64>,
    /// mAP cutoff; `None` ranks the whole database.
    pub map_k: Option<usize>,
    pub optimizer: LbfgsOptions,
}

impl Default for SshConfig {
    fn default() -> Self {
        Self {
            n_label: Some(5_000),
            h: 1_000,
            queries_per_class: 100,
            runs: 10,
            seed: 0,
            lsh_bits: 64,
            lsh_center: true,
            lambda_grid: default_lambda_grid(),
            map_k: None,
            optimizer: LbfgsOptions::default(),
        }
    }
}

impl SshConfig {
    fn echo(&self) -> Vec<(String, String)> {
        let grid: Vec<String> = self.lambda_grid.iter().map(|l| l.to_string()).collect();
        vec![
            ("seed".into(), self.seed.to_string()),
            ("runs".into(), self.runs.to_string()),
            ("queries_per_class".into(), self.queries_per_class.to_string()),
            ("lsh_bits".into(), self.lsh_bits.to_string()),
            ("lsh_center".into(), self.lsh_center.to_string()),
            ("lambda_grid".into(), grid.join(" ")),
            ("map_k".into(), self.map_k.map_or("N".into(), |k| k.to_string())),
        ]
    }
}

/// Query / database partition used by every run.
fn query_split(ds: &Dataset, cfg: &SshConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    if let Some(mask) = &ds.test_mask {
        let (q, db): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| mask[i]);
        return Ok((q, db));
    }
    let mut r = rng(derive_seed(cfg.seed, "queries", 0));
    let mut queries = Vec::new();
    let mut database = Vec::new();
    for (c, mut group) in ds.labels.indices_by_class().into_iter().enumerate() {
        if group.is_empty() {
            continue;
        }
        if group.len() <= cfg.queries_per_class {
            return Err(Error::Config(format!(
                "class {c} has {} items, cannot hold out {} queries and keep database items",
                group.len(),
                cfg.queries_per_class
            )));
        }
        group.shuffle(&mut r);
        queries.extend_from_slice(&group[..cfg.queries_per_class]);
        database.extend_from_slice(&group[cfg.queries_per_class..]);
    }
    queries.sort_unstable();
    database.sort_unstable();
    Ok((queries, database))
}

/// Class-balanced sample of `n` positions into `database` (round-robin over shuffled classes).
fn sample_labeled(ds: &Dataset, database: &[usize], n: usize, seed: u64) -> Vec<usize> {
    if n >= database.len() {
        return (0..database.len()).collect();
    }
    let mut r = rng(seed);
    let mut by_class = vec![Vec::new(); ds.num_classes()];
    for (pos, &i) in database.iter().enumerate() {
        by_class[ds.labels.get(i)].push(pos);
    }
    for g in by_class.iter_mut() {
        g.shuffle(&mut r);
    }
    let mut picked = Vec::with_capacity(n);
    let mut depth = 0;
    while picked.len() < n {
        for g in &by_class {
            if picked.len() == n {
                break;
            }
            if let Some(&p) = g.get(depth) {
                picked.push(p);
            }
        }
        depth += 1;
    }
    picked.sort_unstable();
    picked
}

pub fn run_ssh(dataset: &Dataset, config: &SshConfig, strategy: SshStrategy) -> Result<ProtocolReport> {
    Ok(run_ssh_strategies(dataset, config, &[strategy])?.remove(0))
}

/// Runs several strategies on shared classifiers, one report per strategy, so
/// results are paired run by run.
pub fn run_ssh_strategies(
    dataset: &Dataset,
    config: &SshConfig,
    strategies: &[SshStrategy],
) -> Result<Vec<ProtocolReport>> {
    if strategies.is_empty() {
        return Err(Error::Config("no strategy requested".into()));
    }
    if config.runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let c = dataset.num_classes();
    if c < 2 {
        return Err(Error::Config(format!("SSH evaluation needs at least 2 classes, dataset has {c}")));
    }
    let (queries, database) = query_split(dataset, config)?;
    if queries.is_empty() || database.is_empty() {
        return Err(Error::Config("empty query or database set".into()));
    }
    let n_label = config.n_label.unwrap_or(database.len());
    if n_label == 0 || n_label > database.len() {
        return Err(Error::Config(format!(
            "n_label={} must be in [1, {}] (database size)",
            n_label,
            database.len()
        )));
    }
    if config.h == 0 || config.h > n_label {
        return Err(Error::Config(format!(
            "h={} anchors must be in [1, n_label={}]",
            config.h, n_label
        )));
    }
    if strategies.contains(&SshStrategy::Lsh) && config.lsh_bits == 0 {
        return Err(Error::Config("LSH needs at least one bit".into()));
    }
    let k = config.map_k.unwrap_or(database.len());
    if k == 0 || k > database.len() {
        return Err(Error::Config(format!("mAP cutoff k={k} outside [1, {}]", database.len())));
    }

    let db_x = dataset.features.select_rows(&database);
    let db_y = dataset.labels.select(&database);
    let q_x = dataset.features.select_rows(&queries);
    let q_y = dataset.labels.select(&queries);

    let mut records: Vec<Vec<RunRecord>> = vec![Vec::new(); strategies.len()];
    for run in 0..config.runs {
        let run_seed = derive_seed(config.seed, "run", run as u64);
        let labeled = sample_labeled(dataset, &database, n_label, derive_seed(run_seed, "labeled", 0));
        let lab_x = db_x.select_rows(&labeled);
        let lab_y = db_y.select(&labeled);

        let anchors = GaussianAnchorMap::fit(&lab_x, &db_x, config.h, derive_seed(run_seed, "anchors", 0))?;
        let phi_db = anchors.apply_all(&db_x)?;
        let phi_q = anchors.apply_all(&q_x)?;
        let phi_lab = phi_db.select_rows(&labeled);
        let (model, _cv) = fit_softmax_cv(
            &phi_lab,
            &lab_y,
            &config.lambda_grid,
            derive_seed(run_seed, "cv", 0),
            config.optimizer,
        )?;
        let p_q = model.predict_proba(&phi_q)?;
        let p_db = model.predict_proba(&phi_db)?;
        let accuracy = accuracy_of(p_q.predicted().as_slice(), q_y.as_slice())?;

        let mut known: Vec<Option<usize>> = vec![None; database.len()];
        for &pos in &labeled {
            known[pos] = Some(db_y.get(pos));
        }
        let query_repr = |qi: usize| QueryRepresentation::from_probabilities(p_q.row(qi).to_vec());

        for (si, strategy) in strategies.iter().enumerate() {
            let result = match strategy {
                SshStrategy::OneHot => {
                    let stored: Vec<usize> = (0..database.len())
                        .map(|i| known[i].unwrap_or_else(|| argmax(p_db.row(i))))
                        .collect();
                    let db = DatabaseRepresentation::OneHotLabels {
                        labels: stored,
                        num_classes: c,
                    };
                    map_over_queries(q_y.as_slice(), db_y.as_slice(), k, |qi| rank_onehot(&query_repr(qi), &db))?
                }
                SshStrategy::Topline => {
                    let db = DatabaseRepresentation::topline_vectors(p_db.matrix(), &known)?;
                    map_over_queries(q_y.as_slice(), db_y.as_slice(), k, |qi| rank_topline(&query_repr(qi), &db))?
                }
                SshStrategy::Lsh => {
                    let mut frame = TightFrame::new(c, config.lsh_bits, derive_seed(run_seed, "lsh", 0))?;
                    if config.lsh_center {
                        frame = frame.with_center(vec![1.0 / c as f64; c])?;
                    }
                    let u = match DatabaseRepresentation::topline_vectors(p_db.matrix(), &known)? {
                        DatabaseRepresentation::ProbabilityVectors(u) => u,
                        _ => unreachable!(),
                    };
                    let db = DatabaseRepresentation::BinaryCodes {
                        codes: frame.encode_all(&u)?,
                        bits: config.lsh_bits,
                    };
                    let q_codes = frame.encode_all(p_q.matrix())?;
                    map_over_queries(q_y.as_slice(), db_y.as_slice(), k, |qi| rank_hamming(&q_codes[qi], &db))?
                }
            };
            records[si].push(RunRecord {
                fold: None,
                run,
                value: result.value,
                accuracy: Some(accuracy),
            });
        }
        log::debug!("ssh run {run}: query accuracy {accuracy:.4}");
    }

    Ok(strategies
        .iter()
        .zip(records)
        .map(|(s, recs)| {
            let bits = match s {
                SshStrategy::OneHot => Some(bits_for_classes(c)),
                SshStrategy::Lsh => Some(config.lsh_bits),
                SshStrategy::Topline => None,
            };
            ProtocolReport::new(
                "ssh",
                &dataset.name,
                s.method_name(),
                "mAP",
                Some(n_label),
                Some(config.h),
                bits,
                recs,
                config.echo(),
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic_dataset, SyntheticSpec};

    fn small_config(n_label: usize) -> SshConfig {
        SshConfig {
            n_label: Some(n_label),
            h: 40,
            queries_per_class: 10,
            runs: 2,
            seed: 3,
            lsh_bits: 32,
            lambda_grid: vec![1e-3, 1e-1],
            ..SshConfig::default()
        }
    }

    #[test]
    fn lower_bound_and_sizes() {
        let ds = generate_synthetic_dataset(&SyntheticSpec::new(5, 60, 8, 3.0, 1), "toy").unwrap();
        let cfg = small_config(250);
        let reports = run_ssh_strategies(&ds, &cfg, &[SshStrategy::OneHot, SshStrategy::Lsh, SshStrategy::Topline]).unwrap();
        assert_eq!(reports[0].code_size_bits, Some(3));
        assert_eq!(reports[1].code_size_bits, Some(32));
        assert_eq!(reports[2].code_size_bits, None);
        for r in &reports[0].records {
            assert!(r.value >= r.accuracy.unwrap());
        }
        assert_eq!(reports[0].records.len(), 2);
    }

    #[test]
    fn deterministic() {
        let ds = generate_synthetic_dataset(&SyntheticSpec::new(4, 50, 6, 2.0, 2), "toy").unwrap();
        let cfg = small_config(80);
        assert_eq!(
            run_ssh(&ds, &cfg, SshStrategy::Lsh).unwrap(),
            run_ssh(&ds, &cfg, SshStrategy::Lsh).unwrap()
        );
    }

    #[test]
    fn config_errors() {
        let ds = generate_synthetic_dataset(&SyntheticSpec::new(4, 20, 6, 2.0, 2), "toy").unwrap();
        let mut cfg = small_config(1000);
        assert!(matches!(run_ssh(&ds, &cfg, SshStrategy::OneHot), Err(Error::Config(_))));
        cfg.n_label = Some(30);
        cfg.h = 31;
        assert!(matches!(run_ssh(&ds, &cfg, SshStrategy::OneHot), Err(Error::Config(_))));
        cfg.h = 10;
        cfg.queries_per_class = 20;
        assert!(matches!(run_ssh(&ds, &cfg, SshStrategy::OneHot), Err(Error::Config(_))));
    }

    #[test]
    fn balanced_labeled_sample() {
        let ds = generate_synthetic_dataset(&SyntheticSpec::new(4, 30, 2, 1.0, 0), "toy").unwrap();
        let database: Vec<usize> = (0..ds.len()).collect();
        let picked = sample_labeled(&ds, &database, 42, 1);
        let mut counts = [0; 4];
        for p in &picked {
            counts[ds.labels.get(database[*p])] += 1;
        }
        assert_eq!(counts, [11, 11, 10, 10]);
    }
}
