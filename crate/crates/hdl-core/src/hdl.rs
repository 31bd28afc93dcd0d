//! Hierarchical dynamic labeling.
//!
//! Instead of labeling every unlabeled point independently, the batch is
//! consumed in *levels*. Neighbor queries run over the union of labeled
//! and unlabeled points, so each point's k-NN list reflects its true local
//! neighborhood rather than only the (possibly distant) labeled points:
//!
//! 1. Count, for every unlabeled point, how many of its `k` union-wide
//!    nearest neighbors are currently labeled.
//! 2. The points attaining the maximal count form the current level.
//! 3. Within the level, order members by how much labeling each one would
//!    raise the other members' labeled-neighbor counts (see
//!    [`second_level_order`]).
//! 4. Label members in that order by majority vote over the labeled points
//!    among their `k` nearest neighbors — each newly labeled point counts
//!    as labeled immediately, including for members later in the same
//!    level.
//!
//! Repeat until no unlabeled point remains. Every level labels at least
//! one point (the maximum over a non-empty set is attained), so the run
//! terminates after at most `M` levels.
//!
//! Geometry is static — points never move — so each unlabeled point's k-NN
//! list is computed once up front, and the labeled-neighbor counts are
//! maintained incrementally through a reverse-adjacency table instead of
//! being recounted from scratch each level. This is an optimization only;
//! it is observationally identical to recounting (a tested invariant).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::knn::{build_union_index, Metric, NeighborList, UnionIndex};
use crate::store::{EmbeddingSet, LabelVector, LabeledOutput, OutputRecord};
use crate::vote::{vote, VoteTally};

/// Dynamic labeled/unlabeled view over the global id space.
///
/// Ids `0..N` are the base labeled set and stay labeled forever; ids
/// `N..N+M` start unlabeled and flip to labeled as classes are assigned.
#[derive(Debug, Clone)]
pub struct LabelStatus {
    num_base: usize,
    assigned: Vec<Option<usize>>,
    num_assigned: usize,
}

impl LabelStatus {
    /// A fresh status: `num_labeled` base points, `num_unlabeled` points
    /// awaiting labels.
    pub fn new(num_labeled: usize, num_unlabeled: usize) -> Self {
        LabelStatus {
            num_base: num_labeled,
            assigned: vec![None; num_unlabeled],
            num_assigned: 0,
        }
    }

    /// Number of base labeled points `N`.
    pub fn num_base(&self) -> usize {
        self.num_base
    }

    /// Number of points labeled during the run so far.
    pub fn num_assigned(&self) -> usize {
        self.num_assigned
    }

    /// Total number of currently labeled points.
    pub fn num_labeled(&self) -> usize {
        self.num_base + self.num_assigned
    }

    /// `true` when the global id is currently labeled.
    pub fn is_labeled(&self, id: usize) -> bool {
        id < self.num_base || self.assigned[id - self.num_base].is_some()
    }

    /// Assigns a class to a previously unlabeled id.
    ///
    /// Panics if `id` belongs to the base set or was already assigned —
    /// both are caller bugs, not data conditions.
    pub fn assign(&mut self, id: usize, class: usize) {
        let slot = &mut self.assigned[id - self.num_base];
        assert!(slot.is_none(), "id {id} assigned twice");
        *slot = Some(class);
        self.num_assigned += 1;
    }

    /// The class assigned to `id` during the run, if any.
    pub fn assigned_label(&self, id: usize) -> Option<usize> {
        if id < self.num_base {
            None
        } else {
            self.assigned[id - self.num_base]
        }
    }

    /// The current label of `id`: its base label if `id < N`, otherwise
    /// its assigned label if one exists.
    pub fn label_of(&self, id: usize, base: &LabelVector) -> Option<usize> {
        if id < self.num_base {
            Some(base.get(id))
        } else {
            self.assigned[id - self.num_base]
        }
    }

    /// Global ids still unlabeled, ascending.
    pub fn unlabeled_ids(&self) -> Vec<usize> {
        self.assigned
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_none())
            .map(|(i, _)| self.num_base + i)
            .collect()
    }
}

/// One level of a run: who belongs to it and in which order it is labeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelPlan {
    /// 0-based level ordinal (0 for standalone calls; the run loop sets it).
    pub level: usize,
    /// Member global ids, ascending.
    pub members: Vec<usize>,
    /// The maximal labeled-neighbor count the members attain.
    pub l_max: usize,
    /// Within-level priority score per member, aligned with `members`.
    pub scores: Vec<usize>,
    /// Member global ids in labeling order: descending score, ties by
    /// ascending id.
    pub order: Vec<usize>,
}

/// Counts, for every point still unlabeled under `status`, how many of its
/// `k` nearest union neighbors are currently labeled. Returns
/// `(global id, count)` pairs in ascending id order.
///
/// This is the transparent from-scratch recount; [`run_hdl`] maintains the
/// same numbers incrementally.
pub fn labeled_neighbor_counts(
    index: &UnionIndex<'_>,
    status: &LabelStatus,
    k: usize,
) -> Result<Vec<(usize, usize)>> {
    let unlabeled = status.unlabeled_ids();
    let lists = index.knn_batch(&unlabeled, k)?;
    Ok(unlabeled
        .iter()
        .zip(&lists)
        .map(|(&gid, list)| (gid, list.ids().filter(|&id| status.is_labeled(id)).count()))
        .collect())
}

/// Selects the first level: every id attaining the maximal count, in
/// ascending id order. Empty input yields an empty level.
pub fn select_first_level(counts: &[(usize, usize)]) -> Vec<usize> {
    let Some(l_max) = counts.iter().map(|&(_, c)| c).max() else {
        return Vec::new();
    };
    counts
        .iter()
        .filter(|&&(_, c)| c == l_max)
        .map(|&(gid, _)| gid)
        .collect()
}

/// Computes the within-level labeling order.
///
/// For each member `i` the score is what the other members' labeled-
/// neighbor counts would sum to if `i` alone were hypothetically labeled:
/// `score(i) = sum over j != i of (count(j) + [i in kNN(j)])`. Since the
/// hypothetical transfer of `i` can only affect members whose k-NN lists
/// contain `i`, the score reduces to the members' count total minus
/// `count(i)` plus `i`'s in-degree in the members' k-NN graph — no
/// recounting required. The order is descending score, ties by ascending
/// global id.
///
/// `members` must be unlabeled under `status`, in ascending id order.
pub fn second_level_order(
    index: &UnionIndex<'_>,
    status: &LabelStatus,
    members: &[usize],
    k: usize,
) -> Result<LevelPlan> {
    let lists = index.knn_batch(members, k)?;
    let base_counts: Vec<usize> = lists
        .iter()
        .map(|list| list.ids().filter(|&id| status.is_labeled(id)).count())
        .collect();
    let list_refs: Vec<&NeighborList> = lists.iter().collect();
    Ok(build_plan(0, members, &base_counts, &list_refs))
}

/// Shared plan construction from precomputed member neighbor lists and
/// their current labeled-neighbor counts.
fn build_plan(
    level: usize,
    members: &[usize],
    base_counts: &[usize],
    member_lists: &[&NeighborList],
) -> LevelPlan {
    let s = members.len();
    let member_pos: HashMap<usize, usize> = members
        .iter()
        .enumerate()
        .map(|(pos, &gid)| (gid, pos))
        .collect();
    let mut indegree = vec![0usize; s];
    for list in member_lists {
        for id in list.ids() {
            if let Some(&pos) = member_pos.get(&id) {
                indegree[pos] += 1;
            }
        }
    }
    let total: usize = base_counts.iter().sum();
    let scores: Vec<usize> = (0..s)
        .map(|pos| total - base_counts[pos] + indegree[pos])
        .collect();
    let mut by_priority: Vec<usize> = (0..s).collect();
    by_priority.sort_by(|&a, &b| scores[b].cmp(&scores[a]).then(members[a].cmp(&members[b])));
    LevelPlan {
        level,
        members: members.to_vec(),
        l_max: base_counts.iter().copied().max().unwrap_or(0),
        scores,
        order: by_priority.into_iter().map(|pos| members[pos]).collect(),
    }
}

/// Runs hierarchical dynamic labeling over the whole unlabeled set.
///
/// Requires `1 <= k <= N + M - 1` (the union-wide candidate pool of any
/// unlabeled query). Output records carry the level ordinal and the
/// within-level rank each point was labeled at; records are emitted in
/// labeling order, i.e. already sorted by `(level, rank)`.
pub fn run_hdl(
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
    if k == 0 || k > n + m - 1 {
        return Err(Error::KTooLarge {
            requested: k,
            available: n + m - 1,
        });
    }

    // Geometry never changes: one k-NN list per unlabeled point, forever.
    let queries: Vec<usize> = (n..n + m).collect();
    let lists = index.knn_batch(&queries, k)?;

    // rev[id] = local indices of the unlabeled points that have `id` in
    // their k-NN list; labeling `id` bumps exactly those counts.
    let mut rev: Vec<Vec<u32>> = vec![Vec::new(); n + m];
    for (local, list) in lists.iter().enumerate() {
        for id in list.ids() {
            rev[id].push(local as u32);
        }
    }
    let mut counts: Vec<usize> = lists
        .iter()
        .map(|list| list.ids().filter(|&id| id < n).count())
        .collect();

    let mut status = LabelStatus::new(n, m);
    let mut records = Vec::with_capacity(m);
    let mut level = 0usize;
    while status.num_assigned() < m {
        // First level: all unlabeled points attaining the maximal count.
        let mut l_max = 0usize;
        let mut members: Vec<usize> = Vec::new();
        for (local, &count) in counts.iter().enumerate() {
            if status.assigned_label(n + local).is_some() {
                continue;
            }
            match count.cmp(&l_max) {
                std::cmp::Ordering::Greater => {
                    l_max = count;
                    members.clear();
                    members.push(n + local);
                }
                std::cmp::Ordering::Equal => members.push(n + local),
                std::cmp::Ordering::Less => {}
            }
        }

        let base_counts: Vec<usize> = members.iter().map(|&gid| counts[gid - n]).collect();
        let member_lists: Vec<&NeighborList> = members.iter().map(|&gid| &lists[gid - n]).collect();
        let plan = build_plan(level, &members, &base_counts, &member_lists);

        for (rank, &gid) in plan.order.iter().enumerate() {
            let voter_labels: Vec<usize> = lists[gid - n]
                .ids()
                .filter(|&id| status.is_labeled(id))
                .map(|id| status.label_of(id, labels).unwrap())
                .collect();
            let tally = if voter_labels.is_empty() {
                fallback_vote(&index, &status, labels, gid, k)?
            } else {
                vote(&voter_labels, labels.num_classes())?
            };
            status.assign(gid, tally.winner);
            for &local in &rev[gid] {
                counts[local as usize] += 1;
            }
            records.push(OutputRecord {
                index: gid - n,
                label: tally.winner,
                level,
                rank,
                margin: tally.margin(),
            });
        }
        level += 1;
        debug_assert!(level <= m, "levels exceeded the unlabeled count");
    }
    Ok(LabeledOutput { records })
}

/// Vote for a point none of whose `k` union neighbors is labeled yet
/// (possible in sparse regions when the level maximum is zero): fall back
/// to its nearest *currently labeled* points, direct-voting style. Takes
/// `min(k, currently labeled)` voters so progress is always possible.
fn fallback_vote(
    index: &UnionIndex<'_>,
    status: &LabelStatus,
    labels: &LabelVector,
    query: usize,
    k: usize,
) -> Result<VoteTally> {
    let mut candidates: Vec<(f64, usize)> = (0..index.len())
        .filter(|&id| id != query && status.is_labeled(id))
        .map(|id| (index.distance(query, id), id))
        .collect();
    if candidates.is_empty() {
        return Err(Error::EmptyVoterSet);
    }
    let take = k.min(candidates.len());
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if take < candidates.len() {
        candidates.select_nth_unstable_by(take - 1, cmp);
        candidates.truncate(take);
    }
    candidates.sort_unstable_by(cmp);
    let voter_labels: Vec<usize> = candidates
        .iter()
        .map(|&(_, id)| status.label_of(id, labels).unwrap())
        .collect();
    vote(&voter_labels, labels.num_classes())
}
