//! Evaluation protocols: SH/SSH with a classifier, retrieval of unseen
//! classes and transfer learning from codes.

pub mod report;
pub mod splits;
pub mod ssh;
pub mod transfer;
pub mod unseen;

pub use report::{
    csv_string, curve_csv, markdown_for_reports, markdown_table, mean_std, read_summary_csv, write_csv,
    ProtocolReport, RunRecord, SummaryRow, CSV_HEADER,
};
pub use splits::{make_class_splits, ClassSplit, SplitSets, MIN_CLASSES, NUM_FOLDS};
pub use ssh::{run_ssh, run_ssh_strategies, SshConfig, SshStrategy};
pub use transfer::{run_protocol2, transfer_curve, Curve, TransferConfig};
pub use unseen::{run_protocol1, UnseenConfig, UnseenMetric};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{aggregate, average_precision_at_k, MetricResult, RelevanceJudgment};
use crate::types::Ranking;

/// mAP@k over queries ranked by `rank(query_index)`, computed in parallel and
/// reduced in query order.
pub(crate) fn map_over_queries<F>(
    query_labels: &[usize],
    database_labels: &[usize],
    k: usize,
    rank: F,
) -> Result<MetricResult>
where
    F: Fn(usize) -> Result<Ranking> + Sync,
{
    let per: Vec<Option<f64>> = query_labels
        .par_iter()
        .enumerate()
        .map(|(qi, &label)| {
            let rel = RelevanceJudgment::new(label, database_labels)?;
            let ranking = rank(qi)?;
            match average_precision_at_k(&rel, &ranking, k) {
                Ok(ap) => Ok(Some(ap)),
                Err(Error::UndefinedAp) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    aggregate(per, k)
}
