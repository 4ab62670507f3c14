//! Ranking and classification measures: precision@k, AP@k, mAP and accuracy.
//!
//! An item is correct for a query when it carries the query's label. The
//! AP normalizer is `cl(q)`, the number of correct items in the whole
//! database, even when the ranking is cut at `k < N`.

use rayon::prelude::*;

use crate::error::{shape, Error, Result};
use crate::types::{LabelVector, Ranking};

/// Ground truth for one query: its label and the labels of all database items.
#[derive(Debug, Clone, Copy)]
pub struct RelevanceJudgment<'a> {
    pub query_label: usize,
    pub database_labels: &'a [usize],
}

impl<'a> RelevanceJudgment<'a> {
    pub fn new(query_label: usize, database_labels: &'a [usize]) -> Result<Self> {
        if database_labels.is_empty() {
            return Err(shape("relevance judgment over an empty database"));
        }
        Ok(Self {
            query_label,
            database_labels,
        })
    }

    #[inline]
    pub fn is_correct(&self, item: usize) -> bool {
        self.database_labels[item] == self.query_label
    }

    /// `cl(q)`: number of correct items in the full database.
    pub fn num_correct(&self) -> usize {
        self.database_labels
            .iter()
            .filter(|&&l| l == self.query_label)
            .count()
    }

    pub fn database_len(&self) -> usize {
        self.database_labels.len()
    }
}

/// Denominator used for AP@k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApNormalizer {
    /// `cl(q)` over the full database.
    #[default]
    CorrectCount,
    /// `min(cl(q), k)`, as used by some other benchmarks.
    TruncatedCorrectCount,
}

/// An aggregated metric value.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub value: f64,
    /// Rank cutoff; equal to the database size when untruncated.
    pub k: usize,
    pub per_query: Option<Vec<f64>>,
    /// Queries left out of the mean because no database item was correct for them.
    pub skipped_queries: usize,
}

fn check_k(k: usize, n: usize, ranking_len: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Range(format!("rank cutoff k={k} outside [1, {n}]")));
    }
    if ranking_len < k {
        return Err(Error::Range(format!(
            "ranking covers {ranking_len} items, fewer than k={k}"
        )));
    }
    Ok(())
}

pub fn precision_at_k(rel: &RelevanceJudgment<'_>, ranking: &Ranking, k: usize) -> Result<f64> {
    check_k(k, rel.database_len(), ranking.len())?;
    let hits = ranking.as_slice()[..k]
        .iter()
        .filter(|&&i| rel.is_correct(i))
        .count();
    Ok(hits as f64 / k as f64)
}

pub fn average_precision_at_k(
    rel: &RelevanceJudgment<'_>,
    ranking: &Ranking,
    k: usize,
) -> Result<f64> {
    average_precision_with(rel, ranking, k, ApNormalizer::CorrectCount)
}

pub fn average_precision_with(
    rel: &RelevanceJudgment<'_>,
    ranking: &Ranking,
    k: usize,
    normalizer: ApNormalizer,
) -> Result<f64> {
    check_k(k, rel.database_len(), ranking.len())?;
    let correct = rel.num_correct();
    let hits = ranking.as_slice()[..k].iter().map(|&i| rel.is_correct(i));
    ap_from_hits(hits, correct, k, normalizer)
}

/// AP from the relevance flags read along a ranking.
///
/// `hits` yields δ(q, 1), δ(q, 2), …; only the first `k` are consumed.
pub fn ap_from_hits(
    hits: impl IntoIterator<Item = bool>,
    num_correct: usize,
    k: usize,
    normalizer: ApNormalizer,
) -> Result<f64> {
    if num_correct == 0 {
        return Err(Error::UndefinedAp);
    }
    let mut found = 0usize;
    let mut sum = 0.0;
    for (rank0, hit) in hits.into_iter().take(k).enumerate() {
        if hit {
            found += 1;
            sum += found as f64 / (rank0 + 1) as f64;
        }
    }
    let denom = match normalizer {
        ApNormalizer::CorrectCount => num_correct,
        ApNormalizer::TruncatedCorrectCount => num_correct.min(k),
    };
    Ok(sum / denom as f64)
}

/// Mean AP@k over queries. Queries without any correct item are skipped and counted.
pub fn mean_average_precision(
    rels: &[RelevanceJudgment<'_>],
    rankings: &[Ranking],
    k: usize,
) -> Result<MetricResult> {
    mean_average_precision_with(rels, rankings, k, ApNormalizer::CorrectCount)
}

pub fn mean_average_precision_with(
    rels: &[RelevanceJudgment<'_>],
    rankings: &[Ranking],
    k: usize,
    normalizer: ApNormalizer,
) -> Result<MetricResult> {
    if rels.len() != rankings.len() {
        return Err(shape(format!(
            "{} relevance judgments for {} rankings",
            rels.len(),
            rankings.len()
        )));
    }
    let per: Vec<Option<f64>> = rels
        .par_iter()
        .zip(rankings.par_iter())
        .map(|(rel, ranking)| match average_precision_with(rel, ranking, k, normalizer) {
            Ok(ap) => Ok(Some(ap)),
            Err(Error::UndefinedAp) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    aggregate(per, k)
}

/// Reduces per-query values (None = undefined) in query order.
pub(crate) fn aggregate(per: Vec<Option<f64>>, k: usize) -> Result<MetricResult> {
    let skipped_queries = per.iter().filter(|v| v.is_none()).count();
    let per_query: Vec<f64> = per.into_iter().flatten().collect();
    if per_query.is_empty() {
        return Err(Error::UndefinedAp);
    }
    let mut sum = 0.0;
    for &v in &per_query {
        sum += v;
    }
    Ok(MetricResult {
        value: sum / per_query.len() as f64,
        k,
        per_query: Some(per_query),
        skipped_queries,
    })
}

pub fn classification_accuracy(predicted: &LabelVector, truth: &LabelVector) -> Result<f64> {
    accuracy_of(predicted.as_slice(), truth.as_slice())
}

pub(crate) fn accuracy_of(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(shape("accuracy over zero items"));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Database labels whose relevance along the identity ranking is `flags`.
    fn judged(flags: &[bool]) -> (Vec<usize>, Ranking) {
        let labels = flags.iter().map(|&f| if f { 1 } else { 0 }).collect();
        (labels, Ranking::new((0..flags.len()).collect(), flags.len()).unwrap())
    }

    #[test]
    fn precision_examples() {
        let (labels, ranking) = judged(&[true, false, true, false]);
        let rel = RelevanceJudgment::new(1, &labels).unwrap();
        assert_eq!(precision_at_k(&rel, &ranking, 2).unwrap(), 0.5);
        let all = RelevanceJudgment::new(0, &[0, 0, 0]).unwrap();
        let r3 = Ranking::new(vec![2, 0, 1], 3).unwrap();
        for k in 1..=3 {
            assert_eq!(precision_at_k(&all, &r3, k).unwrap(), 1.0);
        }
        let none = RelevanceJudgment::new(5, &[0, 0, 0]).unwrap();
        assert_eq!(precision_at_k(&none, &r3, 3).unwrap(), 0.0);
    }

    #[test]
    fn precision_k_out_of_range() {
        let (labels, ranking) = judged(&[true, false]);
        let rel = RelevanceJudgment::new(1, &labels).unwrap();
        assert!(matches!(precision_at_k(&rel, &ranking, 0), Err(Error::Range(_))));
        assert!(matches!(precision_at_k(&rel, &ranking, 3), Err(Error::Range(_))));
    }

    #[test]
    fn ap_examples() {
        let (labels, ranking) = judged(&[true, false, true, false]);
        let rel = RelevanceJudgment::new(1, &labels).unwrap();
        let ap = average_precision_at_k(&rel, &ranking, 4).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);

        let (labels, ranking) = judged(&[false, true]);
        let rel = RelevanceJudgment::new(1, &labels).unwrap();
        assert_eq!(average_precision_at_k(&rel, &ranking, 2).unwrap(), 0.5);

        let (labels, ranking) = judged(&[true, true, false, false]);
        let rel = RelevanceJudgment::new(1, &labels).unwrap();
        assert_eq!(average_precision_at_k(&rel, &ranking, 4).unwrap(), 1.0);
    }

    #[test]
    fn ap_normalizer_uses_full_database_count() {
        // two correct items, cut at k=1: 1/2 with cl(q), 1 with min(cl(q), k)
        let (labels, ranking) = judged(&[true, false, true]);
        let rel = RelevanceJudgment::new(1, &labels).unwrap();
        assert_eq!(average_precision_at_k(&rel, &ranking, 1).unwrap(), 0.5);
        let trunc =
            average_precision_with(&rel, &ranking, 1, ApNormalizer::TruncatedCorrectCount).unwrap();
        assert_eq!(trunc, 1.0);
    }

    #[test]
    fn ap_undefined_without_correct_items() {
        let (labels, ranking) = judged(&[false, false]);
        let rel = RelevanceJudgment::new(1, &labels).unwrap();
        assert!(matches!(
            average_precision_at_k(&rel, &ranking, 2),
            Err(Error::UndefinedAp)
        ));
    }

    #[test]
    fn map_examples_and_skipping() {
        let (l1, r1) = judged(&[true, false]);
        let (l2, r2) = judged(&[false, true]);
        let (l3, r3) = judged(&[false, false]);
        let rels = [
            RelevanceJudgment::new(1, &l1).unwrap(),
            RelevanceJudgment::new(1, &l2).unwrap(),
            RelevanceJudgment::new(1, &l3).unwrap(),
        ];
        let rankings = [r1, r2, r3];
        let m = mean_average_precision(&rels, &rankings, 2).unwrap();
        assert_eq!(m.value, 0.75);
        assert_eq!(m.skipped_queries, 1);
        assert_eq!(m.per_query.as_deref(), Some(&[1.0, 0.5][..]));

        let single = mean_average_precision(&rels[1..2], &rankings[1..2], 2).unwrap();
        assert_eq!(single.value, 0.5);
        assert!(mean_average_precision(&rels[..1], &rankings, 2).is_err());
    }

    #[test]
    fn accuracy_examples() {
        let a = LabelVector::from_labels(vec![0, 1, 2, 2]);
        let b = LabelVector::from_labels(vec![0, 1, 1, 2]);
        assert_eq!(classification_accuracy(&a, &b).unwrap(), 0.75);
        assert_eq!(classification_accuracy(&a, &a).unwrap(), 1.0);
        let c = LabelVector::from_labels(vec![1, 0, 0, 0]);
        assert_eq!(classification_accuracy(&a, &c).unwrap(), 0.0);
        let short = LabelVector::from_labels(vec![0]);
        assert!(matches!(
            classification_accuracy(&a, &short),
            Err(Error::Shape(_))
        ));
    }
}
