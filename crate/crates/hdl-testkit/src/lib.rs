//! Reference oracles used only by tests.
//!
//! Everything here recomputes results along an *independent algorithmic
//! route* — naive full-sort neighbor scans, from-scratch recounts each
//! iteration, a materialized pairwise score matrix, quadrature where the
//! implementation sums a series — so agreement with the optimized crate is
//! meaningful. One deliberate exception: distance *arithmetic* (f64
//! accumulation over f32 components in index order) matches the production
//! kernels expression-for-expression, because the cross-checks assert
//! exact equality and a different summation order would manufacture
//! spurious last-bit differences.
//!
//! Nothing in this crate is a dependency of the shipped library or CLI;
//! it is wired in through `dev-dependencies` only.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hdl_core::{EmbeddingSet, LabelVector, Metric};

// ---------------------------------------------------------------------
// shared geometry helpers
// ---------------------------------------------------------------------

/// Full point list of a labeled/unlabeled pair in global-id order.
fn collect_rows(labeled: &EmbeddingSet, unlabeled: &EmbeddingSet) -> Vec<Vec<f32>> {
    let mut rows = Vec::with_capacity(labeled.count() + unlabeled.count());
    for i in 0..labeled.count() {
        rows.push(labeled.row(i).to_vec());
    }
    for i in 0..unlabeled.count() {
        rows.push(unlabeled.row(i).to_vec());
    }
    rows
}

/// Norms recomputed from raw values (not read from the sets' caches).
fn norms_of(rows: &[Vec<f32>]) -> Vec<f64> {
    rows.iter()
        .map(|row| {
            let mut acc = 0.0f64;
            for &v in row {
                acc += v as f64 * v as f64;
            }
            acc.sqrt()
        })
        .collect()
}

/// Distance mirroring the production arithmetic (see module docs).
fn distance(rows: &[Vec<f32>], norms: &[f64], metric: Metric, a: usize, b: usize) -> f64 {
    match metric {
        Metric::Cosine => {
            let (ra, rb) = (&rows[a], &rows[b]);
            let mut dot = 0.0f64;
            for i in 0..ra.len() {
                dot += ra[i] as f64 * rb[i] as f64;
            }
            (1.0 - dot / (norms[a] * norms[b])).clamp(0.0, 2.0)
        }
        Metric::Euclidean => {
            let (ra, rb) = (&rows[a], &rows[b]);
            let mut acc = 0.0f64;
            for i in 0..ra.len() {
                let d = ra[i] as f64 - rb[i] as f64;
                acc += d * d;
            }
            acc.sqrt()
        }
    }
}

/// The `k` nearest allowed ids to `query`: full distance list, full sort
/// by `(distance, id)`, first `k` taken. No partial selection anywhere.
fn naive_knn(
    rows: &[Vec<f32>],
    norms: &[f64],
    metric: Metric,
    query: usize,
    k: usize,
    allow: impl Fn(usize) -> bool,
) -> Vec<(usize, f64)> {
    let mut all: Vec<(f64, usize)> = (0..rows.len())
        .filter(|&id| id != query && allow(id))
        .map(|id| (distance(rows, norms, metric, query, id), id))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    all.truncate(k);
    all.into_iter().map(|(d, id)| (id, d)).collect()
}

/// Lowest-class-wins majority, written as a transparent scan.
fn majority(voter_labels: &[usize], num_classes: usize) -> (usize, f64) {
    let mut counts = vec![0usize; num_classes];
    for &l in voter_labels {
        counts[l] += 1;
    }
    let mut winner = 0usize;
    for c in 1..num_classes {
        if counts[c] > counts[winner] {
            winner = c;
        }
    }
    (winner, counts[winner] as f64 / voter_labels.len() as f64)
}

// ---------------------------------------------------------------------
// brute-force k-NN oracle
// ---------------------------------------------------------------------

/// Recomputes one neighbor list by full sort over the union (or the
/// labeled side only). Returns `(id, distance)` pairs in neighbor order.
pub fn knn_oracle(
    labeled: &EmbeddingSet,
    unlabeled: &EmbeddingSet,
    metric: Metric,
    query: usize,
    k: usize,
    labeled_only: bool,
) -> Vec<(usize, f64)> {
    let rows = collect_rows(labeled, unlabeled);
    let norms = norms_of(&rows);
    let n = labeled.count();
    naive_knn(&rows, &norms, metric, query, k, |id| {
        !labeled_only || id < n
    })
}

// ---------------------------------------------------------------------
// literal hierarchical-labeling oracle
// ---------------------------------------------------------------------

/// One level as the literal procedure saw it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleLevel {
    /// Member global ids, ascending.
    pub members: Vec<usize>,
    /// The maximal labeled-neighbor count that defined the level.
    pub l_max: usize,
    /// Row sums of the materialized pairwise matrix, aligned with
    /// `members`.
    pub scores: Vec<usize>,
    /// Labeling order (descending score, ties by ascending id).
    pub order: Vec<usize>,
}

/// One labeled point in trace order.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRecord {
    pub index: usize,
    pub label: usize,
    pub level: usize,
    pub rank: usize,
    pub margin: f64,
}

/// Everything the literal procedure did.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrace {
    pub records: Vec<OracleRecord>,
    pub levels: Vec<OracleLevel>,
}

/// Literal, unoptimized transcription of hierarchical dynamic labeling.
///
/// Per outer iteration it re-derives every unlabeled point's neighbor
/// list from scratch and materializes the full `s x (s-1)` matrix of
/// hypothetical labeled-neighbor counts: entry `(i, j)` is what member
/// `j`'s count becomes after temporarily marking member `i` labeled,
/// recomputed by a fresh neighbor scan while the mark is in place. No
/// incremental count maintenance, no reverse adjacency, no reuse of
/// neighbor lists across iterations.
pub fn run_hdl_literal(
    labeled: &EmbeddingSet,
    labels: &LabelVector,
    unlabeled: &EmbeddingSet,
    k: usize,
    metric: Metric,
) -> OracleTrace {
    let rows = collect_rows(labeled, unlabeled);
    let norms = norms_of(&rows);
    let n = labeled.count();
    let total = rows.len();
    let num_classes = labels.num_classes();

    let mut is_labeled: Vec<bool> = (0..total).map(|id| id < n).collect();
    let mut point_label: Vec<Option<usize>> = (0..total)
        .map(|id| (id < n).then(|| labels.get(id)))
        .collect();

    let mut records = Vec::new();
    let mut levels = Vec::new();
    let mut level = 0usize;
    loop {
        let unlabeled_ids: Vec<usize> = (n..total).filter(|&id| !is_labeled[id]).collect();
        if unlabeled_ids.is_empty() {
            break;
        }
        // fresh count of labeled neighbors for every unlabeled point
        let counts: Vec<usize> = unlabeled_ids
            .iter()
            .map(|&q| {
                naive_knn(&rows, &norms, metric, q, k, |_| true)
                    .iter()
                    .filter(|&&(id, _)| is_labeled[id])
                    .count()
            })
            .collect();
        let l_max = counts.iter().copied().max().unwrap();
        let members: Vec<usize> = unlabeled_ids
            .iter()
            .zip(&counts)
            .filter(|&(_, &c)| c == l_max)
            .map(|(&id, _)| id)
            .collect();

        // materialize the pairwise matrix: hypothetically transfer member
        // i, re-scan every other member, undo the transfer
        let s = members.len();
        let mut matrix = vec![vec![0usize; s]; s]; // [i][j], diagonal unused
        let mut scores = vec![0usize; s];
        for i in 0..s {
            is_labeled[members[i]] = true;
            for j in 0..s {
                if j == i {
                    continue;
                }
                let l_ij = naive_knn(&rows, &norms, metric, members[j], k, |_| true)
                    .iter()
                    .filter(|&&(id, _)| is_labeled[id])
                    .count();
                matrix[i][j] = l_ij;
                scores[i] += l_ij;
            }
            is_labeled[members[i]] = false;
        }
        let mut by_priority: Vec<usize> = (0..s).collect();
        by_priority.sort_by(|&a, &b| scores[b].cmp(&scores[a]).then(members[a].cmp(&members[b])));
        let order: Vec<usize> = by_priority.iter().map(|&pos| members[pos]).collect();

        // label in order; every new label is visible to the next vote
        for (rank, &gid) in order.iter().enumerate() {
            let neighbor_labels: Vec<usize> = naive_knn(&rows, &norms, metric, gid, k, |_| true)
                .iter()
                .filter(|&&(id, _)| is_labeled[id])
                .map(|&(id, _)| point_label[id].unwrap())
                .collect();
            let (label, margin) = if neighbor_labels.is_empty() {
                let available = (0..total).filter(|&id| id != gid && is_labeled[id]).count();
                let voters: Vec<usize> =
                    naive_knn(&rows, &norms, metric, gid, k.min(available), |id| {
                        is_labeled[id]
                    })
                    .iter()
                    .map(|&(id, _)| point_label[id].unwrap())
                    .collect();
                majority(&voters, num_classes)
            } else {
                majority(&neighbor_labels, num_classes)
            };
            is_labeled[gid] = true;
            point_label[gid] = Some(label);
            records.push(OracleRecord {
                index: gid - n,
                label,
                level,
                rank,
                margin,
            });
        }
        levels.push(OracleLevel {
            members,
            l_max,
            scores,
            order,
        });
        level += 1;
    }
    OracleTrace { records, levels }
}

// ---------------------------------------------------------------------
// local-purity (mu) oracle
// ---------------------------------------------------------------------

/// Recomputes the local-purity estimate with the same seeded center draw
/// (with replacement) but its own full-sort cosine neighbor scans.
pub fn estimate_mu_oracle(
    labeled: &EmbeddingSet,
    labels: &LabelVector,
    k: usize,
    p: f64,
    seed: u64,
) -> f64 {
    let n = labeled.count();
    let m = (n as f64 * p) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
    let empty = EmbeddingSet::new(labeled.dim(), Vec::new()).unwrap();
    let rows = collect_rows(labeled, &empty);
    let norms = norms_of(&rows);
    let hits = centers
        .iter()
        .filter(|&&c| {
            let y = labels.get(c);
            naive_knn(&rows, &norms, Metric::Cosine, c, k, |_| true)
                .iter()
                .all(|&(id, _)| labels.get(id) == y)
        })
        .count();
    hits as f64 / m as f64
}

// ---------------------------------------------------------------------
// regularized incomplete beta oracles
// ---------------------------------------------------------------------

/// Independent binomial-tail evaluation: coefficients from an exact
/// integer Pascal triangle, terms summed in *descending* index order.
pub fn betainc_binomial_oracle(a: usize, b: usize, x: f64) -> f64 {
    let n = a + b - 1;
    let mut row = vec![0u128; n + 1];
    row[0] = 1;
    for i in 1..=n {
        for j in (1..=i).rev() {
            row[j] += row[j - 1];
        }
    }
    let mut sum = 0.0f64;
    for j in (a..=n).rev() {
        let mut term = row[j] as f64;
        for _ in 0..j {
            term *= x;
        }
        for _ in 0..(n - j) {
            term *= 1.0 - x;
        }
        sum += term;
    }
    sum
}

/// Gauss–Legendre nodes and weights on `[lo, hi]`.
fn gauss_legendre(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let mid = 0.5 * (hi + lo);
    let half = 0.5 * (hi - lo);
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut p1;
        let mut p2;
        loop {
            p1 = 1.0f64;
            p2 = 0.0f64;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            let pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        // final derivative at the converged node
        p1 = 1.0;
        p2 = 0.0;
        for j in 1..=n {
            let p3 = p2;
            p2 = p1;
            p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
        }
        let pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
        nodes[i] = mid - half * z;
        nodes[n - 1 - i] = mid + half * z;
        let w = 2.0 * half / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Quadrature of the density-integral form
/// `I_x(a, b) = B(a,b)^-1 * integral_0^x t^(a-1) (1-t)^(b-1) dt` with
/// `B(a,b)^-1 = (a+b-1)! / ((a-1)! (b-1)!)` carried as an exact integer.
///
/// 48 Gauss–Legendre nodes integrate polynomials up to degree 95 exactly,
/// far above the degree `a + b - 2` integrand, so the only error here is
/// rounding.
pub fn betainc_quadrature_oracle(a: usize, b: usize, x: f64) -> f64 {
    // (a+b-1)! / ((a-1)! (b-1)!) built from integer factors
    let mut ratio = 1.0f64;
    // multiply (b)(b+1)...(a+b-1) and divide by (a-1)!
    let mut numerator: u128 = 1;
    for t in b..=(a + b - 1) {
        numerator *= t as u128;
    }
    let mut denominator: u128 = 1;
    for t in 1..=(a - 1) {
        denominator *= t as u128;
    }
    ratio *= numerator as f64 / denominator as f64;
    if x == 0.0 {
        return 0.0;
    }
    let (nodes, weights) = gauss_legendre(48, 0.0, x);
    let mut integral = 0.0f64;
    for (t, w) in nodes.iter().zip(&weights) {
        integral += w * t.powi((a - 1) as i32) * (1.0 - t).powi((b - 1) as i32);
    }
    ratio * integral
}

// ---------------------------------------------------------------------
// random instance generation
// ---------------------------------------------------------------------

/// A random labeled/unlabeled instance for exhaustive cross-checks:
/// uniform values in `[-1, 1]` (rows with pathological near-zero norms are
/// redrawn), labels uniform over `0..num_classes`.
pub fn random_instance(
    seed: u64,
    num_labeled: usize,
    num_unlabeled: usize,
    dim: usize,
    num_classes: usize,
) -> (EmbeddingSet, LabelVector, EmbeddingSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw_set = |count: usize| {
        let mut data = Vec::with_capacity(count * dim);
        for _ in 0..count {
            loop {
                let row: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
                let norm: f64 = row.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
                if norm > 1e-6 {
                    data.extend_from_slice(&row);
                    break;
                }
            }
        }
        EmbeddingSet::new(dim, data).unwrap()
    };
    let labeled = draw_set(num_labeled);
    let unlabeled = draw_set(num_unlabeled);
    let labels: Vec<usize> = (0..num_labeled)
        .map(|_| rng.random_range(0..num_classes))
        .collect();
    let labels = LabelVector::new(labels, num_classes).unwrap();
    (labeled, labels, unlabeled)
}
