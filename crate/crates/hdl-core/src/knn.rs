//! Exact brute-force nearest-neighbor search over a labeled/unlabeled union.
//!
//! The two input sets are addressed through one global id space: labeled
//! rows keep their row ids `0..N`, unlabeled row `m` becomes id `N + m`.
//! Every query is answered by a full scan — no approximation, no pruning —
//! so results depend only on the data, the metric, and the deterministic
//! tie rule: candidates are ordered by `(distance, global id)` ascending.
//! The query point itself is never a candidate.
//!
//! Distances are accumulated in `f64` from the stored `f32` values, always
//! iterating components in index order, so a distance between two given
//! rows is one well-defined number regardless of batching or threading.

use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::store::EmbeddingSet;

/// Distance function used by an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// `1 - dot(x, y) / (|x| |y|)`, clamped to `[0, 2]`. The default:
    /// embedding similarity is conventionally directional.
    Cosine,
    /// `sqrt(sum((x_i - y_i)^2))`.
    Euclidean,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(format!(
                "unknown metric {other:?}; expected \"cosine\" or \"euclidean\""
            )),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Cosine => f.write_str("cosine"),
            Metric::Euclidean => f.write_str("euclidean"),
        }
    }
}

/// One neighbor of a query: global id and distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

/// The `k` nearest neighbors of one query, strictly sorted by
/// `(distance, id)` ascending and never containing the query itself.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub query: usize,
    pub entries: Vec<Neighbor>,
}

impl NeighborList {
    /// Ids only, in neighbor order.
    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|n| n.id)
    }
}

/// Brute-force index over the union of a labeled and an unlabeled set.
///
/// The split into labeled/unlabeled here is static — it reflects the input
/// files, not any labels assigned later during a run.
#[derive(Debug)]
pub struct UnionIndex<'a> {
    labeled: &'a EmbeddingSet,
    unlabeled: &'a EmbeddingSet,
    metric: Metric,
}

/// Builds an index over the two sets, which must share a dimension. Either
/// set may be empty.
pub fn build_union_index<'a>(
    labeled: &'a EmbeddingSet,
    unlabeled: &'a EmbeddingSet,
    metric: Metric,
) -> Result<UnionIndex<'a>> {
    if labeled.dim() != unlabeled.dim() {
        return Err(Error::DimMismatch {
            left: labeled.dim(),
            right: unlabeled.dim(),
        });
    }
    Ok(UnionIndex {
        labeled,
        unlabeled,
        metric,
    })
}

impl UnionIndex<'_> {
    /// Number of labeled points `N`.
    pub fn num_labeled(&self) -> usize {
        self.labeled.count()
    }

    /// Number of unlabeled points `M`.
    pub fn num_unlabeled(&self) -> usize {
        self.unlabeled.count()
    }

    /// Total number of points `N + M`.
    pub fn len(&self) -> usize {
        self.labeled.count() + self.unlabeled.count()
    }

    /// `true` when both sets are empty.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The metric the index answers queries under.
    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// `true` when `id` belongs to the labeled input set (`id < N`).
    pub fn is_labeled_id(&self, id: usize) -> bool {
        id < self.labeled.count()
    }

    /// Row for a global id.
    pub fn row(&self, id: usize) -> &[f32] {
        let n = self.labeled.count();
        if id < n {
            self.labeled.row(id)
        } else {
            self.unlabeled.row(id - n)
        }
    }

    /// Cached norm for a global id.
    pub fn norm(&self, id: usize) -> f64 {
        let n = self.labeled.count();
        if id < n {
            self.labeled.norm(id)
        } else {
            self.unlabeled.norm(id - n)
        }
    }

    /// Distance between two global ids under the index metric.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        match self.metric {
            Metric::Cosine => cosine_distance(self.row(a), self.row(b), self.norm(a), self.norm(b)),
            Metric::Euclidean => euclidean_distance(self.row(a), self.row(b)),
        }
    }

    /// The `k` nearest neighbors of `query` over the whole union,
    /// excluding the query itself.
    pub fn knn(&self, query: usize, k: usize) -> Result<NeighborList> {
        self.knn_filtered(query, k, |_| true)
    }

    /// The `k` nearest neighbors of `query` among labeled points only.
    /// `query` may itself be labeled or unlabeled; it is excluded either
    /// way.
    pub fn knn_within_labeled(&self, query: usize, k: usize) -> Result<NeighborList> {
        let n = self.labeled.count();
        self.knn_filtered(query, k, |id| id < n)
    }

    /// [`knn`](Self::knn) over many queries in parallel. The result order
    /// matches the query order and every list is identical to what the
    /// sequential call produces.
    pub fn knn_batch(&self, queries: &[usize], k: usize) -> Result<Vec<NeighborList>> {
        queries.par_iter().map(|&q| self.knn(q, k)).collect()
    }

    /// [`knn_within_labeled`](Self::knn_within_labeled) over many queries
    /// in parallel, order-preserving.
    pub fn knn_within_labeled_batch(
        &self,
        queries: &[usize],
        k: usize,
    ) -> Result<Vec<NeighborList>> {
        queries
            .par_iter()
            .map(|&q| self.knn_within_labeled(q, k))
            .collect()
    }

    /// Core selection: the `k` nearest candidates passing `allow`, always
    /// excluding `query`, ordered by `(distance, id)`.
    pub(crate) fn knn_filtered(
        &self,
        query: usize,
        k: usize,
        allow: impl Fn(usize) -> bool,
    ) -> Result<NeighborList> {
        let mut candidates: Vec<(f64, usize)> = (0..self.len())
            .filter(|&id| id != query && allow(id))
            .map(|id| (self.distance(query, id), id))
            .collect();
        let available = candidates.len();
        if k == 0 || k > available {
            return Err(Error::KTooLarge {
                requested: k,
                available,
            });
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < available {
            candidates.select_nth_unstable_by(k - 1, cmp);
            candidates.truncate(k);
        }
        candidates.sort_unstable_by(cmp);
        Ok(NeighborList {
            query,
            entries: candidates
                .into_iter()
                .map(|(distance, id)| Neighbor { id, distance })
                .collect(),
        })
    }
}

/// Cosine distance with `f64` accumulation over `f32` components in index
/// order. The clamp absorbs sub-ulp drift just outside `[0, 2]` for
/// (anti)parallel vectors.
pub(crate) fn cosine_distance(a: &[f32], b: &[f32], norm_a: f64, norm_b: f64) -> f64 {
    let mut dot = 0.0f64;
    for i in 0..a.len() {
        dot += a[i] as f64 * b[i] as f64;
    }
    (1.0 - dot / (norm_a * norm_b)).clamp(0.0, 2.0)
}

/// Euclidean distance with `f64` accumulation over `f32` components in
/// index order.
pub(crate) fn euclidean_distance(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for i in 0..a.len() {
        let d = a[i] as f64 - b[i] as f64;
        acc += d * d;
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::EmbeddingSet;

    fn set(dim: usize, values: &[f32]) -> EmbeddingSet {
        EmbeddingSet::new(dim, values.to_vec()).unwrap()
    }

    /// Five 1-d points on a line: labeled {1.0, 10.0}, unlabeled {2.0, 4.0, 9.0}.
    fn line_index() -> (EmbeddingSet, EmbeddingSet) {
        (set(1, &[1.0, 10.0]), set(1, &[2.0, 4.0, 9.0]))
    }

    #[test]
    fn euclidean_knn_on_a_line() {
        let (labeled, unlabeled) = line_index();
        let index = build_union_index(&labeled, &unlabeled, Metric::Euclidean).unwrap();
        // global ids: 0 -> 1.0, 1 -> 10.0, 2 -> 2.0, 3 -> 4.0, 4 -> 9.0
        let list = index.knn(3, 2).unwrap();
        let ids: Vec<usize> = list.ids().collect();
        assert_eq!(ids, vec![2, 0]); // |4-2| = 2, |4-1| = 3
        assert_eq!(list.entries[0].distance, 2.0);
        assert_eq!(list.entries[1].distance, 3.0);
    }

    #[test]
    fn ties_break_toward_the_lower_id() {
        // query at 5.0 with candidates at 3.0 (id 0) and 7.0 (id 1): both
        // distance 2, so the 1-NN must be id 0.
        let labeled = set(1, &[3.0, 7.0]);
        let unlabeled = set(1, &[5.0]);
        let index = build_union_index(&labeled, &unlabeled, Metric::Euclidean).unwrap();
        let list = index.knn(2, 1).unwrap();
        assert_eq!(list.entries[0].id, 0);
        assert_eq!(list.entries[0].distance, 2.0);
        // and with k = 2 the order is (2.0, id 0), (2.0, id 1)
        let list = index.knn(2, 2).unwrap();
        let ids: Vec<usize> = list.ids().collect();
        assert_eq!(ids, vec![0, 1]);
    }

    #[test]
    fn orthogonal_unit_vectors_have_cosine_distance_exactly_one() {
        let labeled = set(2, &[1.0, 0.0]);
        let unlabeled = set(2, &[0.0, 1.0]);
        let index = build_union_index(&labeled, &unlabeled, Metric::Cosine).unwrap();
        assert_eq!(index.distance(0, 1), 1.0);
    }

    #[test]
    fn parallel_and_antiparallel_cosine_extremes() {
        // Pythagorean vectors keep every intermediate product exact in
        // f64 (norms 5, 10, 15), so the extremes land on 0.0 and 2.0
        // without any rounding residue.
        let labeled = set(2, &[3.0, 4.0]);
        let unlabeled = set(2, &[6.0, 8.0, -9.0, -12.0]);
        let index = build_union_index(&labeled, &unlabeled, Metric::Cosine).unwrap();
        assert_eq!(index.distance(0, 1), 0.0); // same direction
        assert_eq!(index.distance(0, 2), 2.0); // opposite direction
    }

    #[test]
    fn labeled_only_queries_skip_unlabeled_points() {
        let (labeled, unlabeled) = line_index();
        let index = build_union_index(&labeled, &unlabeled, Metric::Euclidean).unwrap();
        // query 4 (9.0): nearest overall is 1 (10.0), nearest labeled as well,
        // but 2-NN within labeled must be {1, 0}, skipping ids 2 and 3.
        let list = index.knn_within_labeled(4, 2).unwrap();
        let ids: Vec<usize> = list.ids().collect();
        assert_eq!(ids, vec![1, 0]);
    }

    #[test]
    fn k_bounds_are_enforced() {
        let (labeled, unlabeled) = line_index();
        let index = build_union_index(&labeled, &unlabeled, Metric::Euclidean).unwrap();
        assert!(matches!(
            index.knn(0, 0),
            Err(Error::KTooLarge {
                requested: 0,
                available: 4
            })
        ));
        assert!(matches!(
            index.knn(0, 5),
            Err(Error::KTooLarge {
                requested: 5,
                available: 4
            })
        ));
        // a labeled query within the labeled set loses itself as a candidate
        assert!(matches!(
            index.knn_within_labeled(0, 2),
            Err(Error::KTooLarge {
                requested: 2,
                available: 1
            })
        ));
        // an unlabeled query keeps all N labeled candidates
        assert!(index.knn_within_labeled(2, 2).is_ok());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let labeled = set(2, &[1.0, 0.0]);
        let unlabeled = set(3, &[1.0, 0.0, 0.0]);
        assert!(matches!(
            build_union_index(&labeled, &unlabeled, Metric::Cosine),
            Err(Error::DimMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn empty_unlabeled_side_is_a_valid_index() {
        let labeled = set(2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let unlabeled = EmbeddingSet::new(2, Vec::new()).unwrap();
        let index = build_union_index(&labeled, &unlabeled, Metric::Cosine).unwrap();
        assert_eq!(index.len(), 3);
        let list = index.knn(2, 2).unwrap();
        assert_eq!(list.entries.len(), 2);
    }

    #[test]
    fn batch_matches_sequential() {
        let (labeled, unlabeled) = line_index();
        let index = build_union_index(&labeled, &unlabeled, Metric::Euclidean).unwrap();
        let queries: Vec<usize> = (0..5).collect();
        let batch = index.knn_batch(&queries, 3).unwrap();
        for (&q, list) in queries.iter().zip(&batch) {
            assert_eq!(*list, index.knn(q, 3).unwrap());
        }
    }
}
