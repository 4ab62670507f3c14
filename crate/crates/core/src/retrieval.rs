//! Exhaustive ranking of a database against one query.
//!
//! Every ranking is a full permutation of `0..N`. Equal scores are ordered by
//! ascending database index.

use crate::codecs::bits::hamming_unchecked;
use crate::codecs::onehot::indicator;
use crate::codecs::{BinaryCode, PqCode, PqCodebook};
use crate::error::{shape, Error, Result};
use crate::types::{dot, sq_l2, FeatureMatrix, Ranking};

/// What the database stores for each item.
#[derive(Debug, Clone)]
pub enum DatabaseRepresentation {
    /// A class index per item (true label or predicted argmax).
    OneHotLabels { labels: Vec<usize>, num_classes: usize },
    /// `u(x)` per item: an indicator for labeled items, the posterior otherwise.
    ProbabilityVectors(FeatureMatrix),
    BinaryCodes { codes: Vec<BinaryCode>, bits: usize },
    PqCodes { codebook: PqCodebook, codes: Vec<PqCode> },
    RawFeatures(FeatureMatrix),
}

impl DatabaseRepresentation {
    pub fn len(&self) -> usize {
        match self {
            DatabaseRepresentation::OneHotLabels { labels, .. } => labels.len(),
            DatabaseRepresentation::ProbabilityVectors(m) | DatabaseRepresentation::RawFeatures(m) => m.rows(),
            DatabaseRepresentation::BinaryCodes { codes, .. } => codes.len(),
            DatabaseRepresentation::PqCodes { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DatabaseRepresentation::OneHotLabels { .. } => "onehot_labels",
            DatabaseRepresentation::ProbabilityVectors(_) => "probability_vectors",
            DatabaseRepresentation::BinaryCodes { .. } => "binary_codes",
            DatabaseRepresentation::PqCodes { .. } => "pq_codes",
            DatabaseRepresentation::RawFeatures(_) => "raw_features",
        }
    }

    /// Builds `u(x)`: indicator of the known label where present, posterior row otherwise.
    pub fn topline_vectors(posteriors: &FeatureMatrix, known: &[Option<usize>]) -> Result<Self> {
        if posteriors.rows() != known.len() {
            return Err(shape(format!(
                "{} posterior rows for {} label slots",
                posteriors.rows(),
                known.len()
            )));
        }
        let c = posteriors.cols();
        let mut out = posteriors.clone();
        for (i, k) in known.iter().enumerate() {
            if let Some(label) = *k {
                if label >= c {
                    return Err(Error::Range(format!("label {label} >= {c} classes")));
                }
                out.row_mut(i).copy_from_slice(&indicator(label, c));
            }
        }
        Ok(DatabaseRepresentation::ProbabilityVectors(out))
    }

    fn unexpected(&self, op: &str) -> Error {
        shape(format!("{op} cannot rank a {} database", self.kind()))
    }
}

/// A query: its class posterior, its raw descriptor, or both.
#[derive(Debug, Clone, Default)]
pub struct QueryRepresentation {
    pub probabilities: Option<Vec<f64>>,
    pub features: Option<Vec<f64>>,
}

impl QueryRepresentation {
    pub fn from_probabilities(p: Vec<f64>) -> Self {
        Self {
            probabilities: Some(p),
            features: None,
        }
    }

    pub fn from_features(x: Vec<f64>) -> Self {
        Self {
            probabilities: None,
            features: Some(x),
        }
    }

    fn probs(&self) -> Result<&[f64]> {
        self.probabilities
            .as_deref()
            .ok_or_else(|| shape("query has no probability vector"))
    }
}

/// Order-preserving map of `f64` (by `total_cmp`, with -0.0 folded into 0.0) onto `u64`.
fn ascending_key(x: f64) -> u64 {
    let bits = (x + 0.0).to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

fn order_by_key(n: usize, key: impl Fn(usize) -> u64) -> Ranking {
    let mut keyed: Vec<(u64, usize)> = (0..n).map(|i| (key(i), i)).collect();
    // (key, index) pairs are distinct, so an unstable sort is deterministic
    keyed.sort_unstable();
    Ranking::from_order_unchecked(keyed.into_iter().map(|(_, i)| i).collect())
}

/// Sorts indices by descending score, ascending index on ties.
pub(crate) fn order_descending(scores: &[f64]) -> Ranking {
    order_by_key(scores.len(), |i| !ascending_key(scores[i]))
}

/// Sorts indices by ascending distance, ascending index on ties.
pub(crate) fn order_ascending(dists: &[f64]) -> Ranking {
    order_by_key(dists.len(), |i| ascending_key(dists[i]))
}

fn check_dim(got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(shape(format!("{what}: query has dimension {got}, database {want}")));
    }
    Ok(())
}

/// Descending `⟨P̂(·|q), u(x)⟩`.
pub fn rank_topline(query: &QueryRepresentation, db: &DatabaseRepresentation) -> Result<Ranking> {
    let p = query.probs()?;
    match db {
        DatabaseRepresentation::ProbabilityVectors(u) => {
            check_dim(p.len(), u.cols(), "topline")?;
            let scores: Vec<f64> = u.iter_rows().map(|row| dot(p, row)).collect();
            Ok(order_descending(&scores))
        }
        DatabaseRepresentation::OneHotLabels { .. } => rank_onehot(query, db),
        other => Err(other.unexpected("rank_topline")),
    }
}

/// Items of the most probable class first, then the next class, and so on.
pub fn rank_onehot(query: &QueryRepresentation, db: &DatabaseRepresentation) -> Result<Ranking> {
    let p = query.probs()?;
    match db {
        DatabaseRepresentation::OneHotLabels {
            labels,
            num_classes,
        } => {
            check_dim(p.len(), *num_classes, "one-hot")?;
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); *num_classes];
            for (i, &l) in labels.iter().enumerate() {
                if l >= *num_classes {
                    return Err(Error::Range(format!("stored class {l} of item {i} outside 0..{num_classes}")));
                }
                members[l].push(i);
            }
            let mut classes: Vec<(u64, usize)> = (0..*num_classes).map(|c| (!ascending_key(p[c]), c)).collect();
            classes.sort_unstable();
            let mut order = Vec::with_capacity(labels.len());
            let mut g = 0;
            while g < classes.len() {
                let mut end = g + 1;
                while end < classes.len() && classes[end].0 == classes[g].0 {
                    end += 1;
                }
                let start = order.len();
                for &(_, c) in &classes[g..end] {
                    order.extend_from_slice(&members[c]);
                }
                // classes with equal probability share one block in index order
                if end - g > 1 {
                    order[start..].sort_unstable();
                }
                g = end;
            }
            Ok(Ranking::from_order_unchecked(order))
        }
        other => Err(other.unexpected("rank_onehot")),
    }
}

/// Ascending Hamming distance to the query code.
pub fn rank_hamming(query_code: &BinaryCode, db: &DatabaseRepresentation) -> Result<Ranking> {
    match db {
        DatabaseRepresentation::BinaryCodes { codes, bits } => {
            check_dim(query_code.len(), *bits, "Hamming")?;
            let q = query_code.as_bytes();
            let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); bits + 1];
            for (i, c) in codes.iter().enumerate() {
                if c.len() != *bits {
                    return Err(shape(format!("database code {i} has {} bits, expected {bits}", c.len())));
                }
                buckets[hamming_unchecked(q, c.as_bytes()) as usize].push(i);
            }
            // counting sort: buckets are filled in index order
            Ok(Ranking::from_order_unchecked(buckets.concat()))
        }
        other => Err(other.unexpected("rank_hamming")),
    }
}

/// Ascending squared L2; PQ databases are scored by asymmetric distance.
pub fn rank_l2(query_feature: &[f64], db: &DatabaseRepresentation) -> Result<Ranking> {
    match db {
        DatabaseRepresentation::RawFeatures(x) => {
            check_dim(query_feature.len(), x.cols(), "L2")?;
            let d: Vec<f64> = x.iter_rows().map(|r| sq_l2(query_feature, r)).collect();
            Ok(order_ascending(&d))
        }
        DatabaseRepresentation::PqCodes { codebook, codes } => {
            let table = codebook.distance_table(query_feature)?;
            let d: Vec<f64> = codes.iter().map(|c| table.distance(c)).collect();
            Ok(order_ascending(&d))
        }
        other => Err(other.unexpected("rank_l2")),
    }
}

/// Descending dot product with raw database vectors.
pub fn rank_inner_product(query_feature: &[f64], db: &DatabaseRepresentation) -> Result<Ranking> {
    match db {
        DatabaseRepresentation::RawFeatures(x) | DatabaseRepresentation::ProbabilityVectors(x) => {
            check_dim(query_feature.len(), x.cols(), "inner product")?;
            let s: Vec<f64> = x.iter_rows().map(|r| dot(query_feature, r)).collect();
            Ok(order_descending(&s))
        }
        other => Err(other.unexpected("rank_inner_product")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::TightFrame;
    use crate::seed::rng;
    use rand::Rng;

    fn probs(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn onehot_groups_classes_by_posterior() {
        let db = DatabaseRepresentation::OneHotLabels {
            labels: vec![2, 0, 1, 2, 0, 1],
            num_classes: 3,
        };
        let q = QueryRepresentation::from_probabilities(vec![0.2, 0.1, 0.7]);
        assert_eq!(rank_onehot(&q, &db).unwrap().as_slice(), &[0, 3, 1, 4, 2, 5]);
        let sure = QueryRepresentation::from_probabilities(vec![0.0, 1.0, 0.0]);
        assert_eq!(&rank_onehot(&sure, &db).unwrap().as_slice()[..2], &[2, 5]);
    }

    #[test]
    fn uniform_query_keeps_index_order() {
        let db = DatabaseRepresentation::OneHotLabels {
            labels: vec![1, 0, 1, 0],
            num_classes: 2,
        };
        let q = QueryRepresentation::from_probabilities(vec![0.5, 0.5]);
        assert_eq!(rank_onehot(&q, &db).unwrap().as_slice(), &[0, 1, 2, 3]);
    }

    #[test]
    fn onehot_matches_topline_on_indicator_vectors() {
        let mut r = rng(0);
        let labels: Vec<usize> = (0..200).map(|_| r.random_range(0..5)).collect();
        let known: Vec<Option<usize>> = labels.iter().map(|&l| Some(l)).collect();
        let u = DatabaseRepresentation::topline_vectors(&FeatureMatrix::zeros(200, 5), &known).unwrap();
        let oh = DatabaseRepresentation::OneHotLabels {
            labels,
            num_classes: 5,
        };
        for _ in 0..20 {
            let mut p: Vec<f64> = (0..5).map(|_| r.random::<f64>()).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);
            let q = QueryRepresentation::from_probabilities(p);
            assert_eq!(rank_onehot(&q, &oh).unwrap(), rank_topline(&q, &u).unwrap());
        }
    }

    #[test]
    fn topline_mixes_indicators_and_posteriors() {
        let post = probs(&[&[0.6, 0.4], &[0.9, 0.1], &[0.3, 0.7]]);
        let db = DatabaseRepresentation::topline_vectors(&post, &[Some(1), None, None]).unwrap();
        let q = QueryRepresentation::from_probabilities(vec![0.8, 0.2]);
        // scores: 0.2, 0.74, 0.38
        assert_eq!(rank_topline(&q, &db).unwrap().as_slice(), &[1, 2, 0]);
        assert_eq!(
            rank_topline(&q, &db).unwrap(),
            rank_inner_product(&[0.8, 0.2], &db).unwrap()
        );
        assert!(rank_topline(&QueryRepresentation::from_probabilities(vec![1.0]), &db).is_err());
    }

    #[test]
    fn hamming_matches_sorted_distance_list() {
        let f = TightFrame::new(6, 32, 1).unwrap();
        let mut r = rng(4);
        let xs: Vec<Vec<f64>> = (0..300).map(|_| (0..6).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let codes: Vec<BinaryCode> = xs.iter().map(|x| f.encode(x).unwrap()).collect();
        let q = codes[17].clone();
        let mut oracle: Vec<(u32, usize)> = codes
            .iter()
            .enumerate()
            .map(|(i, c)| (crate::codecs::hamming_distance(&q, c).unwrap(), i))
            .collect();
        oracle.sort();
        let db = DatabaseRepresentation::BinaryCodes { codes, bits: 32 };
        let ranking = rank_hamming(&q, &db).unwrap();
        assert_eq!(ranking.as_slice()[0], 17);
        assert_eq!(ranking.into_vec(), oracle.into_iter().map(|(_, i)| i).collect::<Vec<_>>());
        assert!(rank_hamming(&BinaryCode::zeros(31), &db).is_err());
    }

    #[test]
    fn l2_and_inner_product() {
        let x = probs(&[&[0.0, 0.0], &[1.0, 1.0], &[3.0, 0.0], &[1.0, 1.0]]);
        let db = DatabaseRepresentation::RawFeatures(x.clone());
        assert_eq!(rank_l2(&[1.0, 1.0], &db).unwrap().as_slice(), &[1, 3, 0, 2]);
        let mut far = x.into_vec();
        far.extend([100.0, 100.0]);
        let db2 = DatabaseRepresentation::RawFeatures(FeatureMatrix::new(5, 2, far).unwrap());
        assert_eq!(rank_l2(&[1.0, 1.0], &db2).unwrap().as_slice(), &[1, 3, 0, 2, 4]);
        let a = rank_inner_product(&[1.0, 0.5], &db).unwrap();
        let b = rank_inner_product(&[3.0, 1.5], &db).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.as_slice(), &[2, 1, 3, 0]);
        assert!(rank_l2(&[1.0], &db).is_err());
        let oh = DatabaseRepresentation::OneHotLabels { labels: vec![0], num_classes: 1 };
        assert!(rank_l2(&[1.0], &oh).is_err());
    }

    fn reference_descending(scores: &[f64]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| (scores[b] + 0.0).total_cmp(&(scores[a] + 0.0)).then(a.cmp(&b)));
        idx
    }

    proptest::proptest! {
        #[test]
        fn key_sort_matches_comparison_sort(raw in proptest::collection::vec(-4i32..4, 0..60), scale in 0.1f64..10.0) {
            // few distinct values so ties are common; include signed zeros
            let scores: Vec<f64> = raw.iter().map(|&v| if v == -4 { -0.0 } else { v as f64 * scale }).collect();
            proptest::prop_assert_eq!(order_descending(&scores).into_vec(), reference_descending(&scores));
            let asc = reference_descending(&scores.iter().map(|v| -v).collect::<Vec<_>>());
            proptest::prop_assert_eq!(order_ascending(&scores).into_vec(), asc);
        }

        #[test]
        fn onehot_buckets_match_score_sort(labels in proptest::collection::vec(0usize..4, 1..60), p in proptest::collection::vec(0u8..3, 4)) {
            let p: Vec<f64> = p.iter().map(|&v| f64::from(v) / 4.0).collect();
            let scores: Vec<f64> = labels.iter().map(|&l| p[l]).collect();
            let db = DatabaseRepresentation::OneHotLabels { labels, num_classes: 4 };
            let q = QueryRepresentation::from_probabilities(p);
            proptest::prop_assert_eq!(rank_onehot(&q, &db).unwrap().into_vec(), reference_descending(&scores));
        }
    }
}
