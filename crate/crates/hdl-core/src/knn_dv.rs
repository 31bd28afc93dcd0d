//! Direct k-NN voting: the one-shot baseline labeler.
//!
//! Every unlabeled point is labeled independently by a majority vote over
//! its `k` nearest *labeled* neighbors. No unlabeled point ever influences
//! another, so the output is trivially order-independent and parallel:
//! all records carry level 0, and rank equals input order.

use crate::error::{Error, Result};
use crate::knn::{build_union_index, Metric};
use crate::store::{EmbeddingSet, LabelVector, LabeledOutput, OutputRecord};
use crate::vote::vote;

/// Labels every row of `unlabeled` by majority vote over its `k` nearest
/// rows of `labeled`.
///
/// Requires `1 <= k <= labeled.count()` and `labels.len() == labeled.count()`.
pub fn run_knn_dv(
    labeled: &EmbeddingSet,
    labels: &LabelVector,
    unlabeled: &EmbeddingSet,
    k: usize,
    metric: Metric,
) -> Result<LabeledOutput> {
    if labels.len() != labeled.count() {
        return Err(Error::CountMismatch {
            expected: labeled.count(),
            found: labels.len(),
        });
    }
    let index = build_union_index(labeled, unlabeled, metric)?;
    let n = labeled.count();
    let m = unlabeled.count();
    if m == 0 {
        return Ok(LabeledOutput::default());
    }
    if k == 0 || k > n {
        return Err(Error::KTooLarge {
            requested: k,
            available: n,
        });
    }
    let queries: Vec<usize> = (n..n + m).collect();
    let lists = index.knn_within_labeled_batch(&queries, k)?;
    let mut records = Vec::with_capacity(m);
    for (m_idx, list) in lists.iter().enumerate() {
        let voter_labels: Vec<usize> = list.ids().map(|id| labels.get(id)).collect();
        let tally = vote(&voter_labels, labels.num_classes())?;
        records.push(OutputRecord {
            index: m_idx,
            label: tally.winner,
            level: 0,
            rank: m_idx,
            margin: tally.margin(),
        });
    }
    Ok(LabeledOutput { records })
}
