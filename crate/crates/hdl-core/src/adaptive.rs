//! Adaptive selection of the neighborhood size `k`.
//!
//! A majority vote over `k` neighbors succeeds when the point sits in a
//! locally pure region (its neighbors share its label) and not too many
//! individual votes are wrong. The two factors are estimated separately:
//!
//! * `mu_k` — the *measured* probability that a random labeled point and
//!   its `k` nearest labeled neighbors (cosine) all carry one label,
//!   estimated by sampling centers;
//! * the *assumed* probability that at most `k'` of the votes are bad
//!   when each is independently bad with rate `e`, where
//!   `k' = ceil((k+1)/2) - 1` is the largest minority a majority of
//!   `k + 1` can absorb. This is a binomial tail, i.e. a regularized
//!   incomplete beta value `I_{1-e}(k + 1 - k', k' + 1)`.
//!
//! The product lower-bounds the vote success rate; [`select_k`] scans
//! candidate `k` values and keeps the argmax.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::knn::{build_union_index, Metric};
use crate::store::{EmbeddingSet, LabelVector};

/// Regularized incomplete beta function `I_x(a, b)` for positive integer
/// `a`, `b` and `x` in `[0, 1]`.
///
/// For integer parameters the value is exactly a binomial tail:
///
/// ```text
/// I_x(a, b) = P(Bin(a + b - 1, x) >= a)
///           = sum_{j=a}^{a+b-1} C(a+b-1, j) x^j (1-x)^(a+b-1-j)
/// ```
///
/// which this function evaluates term by term — no continued fractions,
/// no quadrature, and `I_x(1, 1) = x` without rounding. Binomial
/// coefficients are carried exactly in `f64` (the parameters in use here
/// keep them far below 2^53).
pub fn reg_inc_beta(a: usize, b: usize, x: f64) -> Result<f64> {
    if a == 0 || b == 0 {
        return Err(Error::DomainError {
            what: format!(
                "reg_inc_beta requires positive integer parameters, got a = {a}, b = {b}"
            ),
        });
    }
    if !x.is_finite() || !(0.0..=1.0).contains(&x) {
        return Err(Error::DomainError {
            what: format!("reg_inc_beta requires x in [0, 1], got {x}"),
        });
    }
    let n = a + b - 1;
    let mut coeff = 1.0f64; // C(n, 0)
    let mut sum = 0.0f64;
    for j in 1..=n {
        // C(n, j) = C(n, j-1) * (n - j + 1) / j; the intermediate product
        // is an integer below 2^53 for the parameter sizes in use, and
        // the division by j is exact because the quotient is an integer.
        coeff = (coeff * (n - j + 1) as f64) / j as f64;
        if j >= a {
            sum += coeff * x.powi(j as i32) * (1.0 - x).powi((n - j) as i32);
        }
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// The largest minority a majority over `k + 1` votes can absorb:
/// `k' = ceil((k+1)/2) - 1`, which simplifies to `k / 2`.
pub fn half_committee(k: usize) -> usize {
    k / 2
}

/// The vote-success factor for candidate `k` under error rate `e`:
/// `I_{1-e}(k + 1 - k', k' + 1)`.
pub fn vote_success_bound(k: usize, e: f64) -> Result<f64> {
    let kp = half_committee(k);
    reg_inc_beta(k + 1 - kp, kp + 1, 1.0 - e)
}

/// How centers are drawn when estimating `mu_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// Independent uniform draws; a center can repeat. The default.
    WithReplacement,
    /// Distinct centers.
    WithoutReplacement,
}

/// Estimates `mu_k` by sampling `floor(N * p)` centers with replacement.
///
/// A center scores a hit when it and its `k` nearest labeled neighbors
/// (cosine distance, the center itself excluded) all carry one label.
/// Identical seeds give identical estimates.
pub fn estimate_mu(
    labeled: &EmbeddingSet,
    labels: &LabelVector,
    k: usize,
    p: f64,
    seed: u64,
) -> Result<f64> {
    estimate_mu_with_mode(labeled, labels, k, p, seed, SampleMode::WithReplacement)
}

/// [`estimate_mu`] with an explicit sampling mode.
pub fn estimate_mu_with_mode(
    labeled: &EmbeddingSet,
    labels: &LabelVector,
    k: usize,
    p: f64,
    seed: u64,
    mode: SampleMode,
) -> Result<f64> {
    if labels.len() != labeled.count() {
        return Err(Error::CountMismatch {
            expected: labeled.count(),
            found: labels.len(),
        });
    }
    if !p.is_finite() || !(p > 0.0 && p <= 1.0) {
        return Err(Error::DomainError {
            what: format!("sample fraction p must lie in (0, 1], got {p}"),
        });
    }
    let n = labeled.count();
    // centers come from the labeled set itself, so a center has n - 1
    // candidate neighbors
    if k == 0 || k + 1 > n {
        return Err(Error::KTooLarge {
            requested: k,
            available: n.saturating_sub(1),
        });
    }
    let m = (n as f64 * p) as usize;
    if m == 0 {
        return Err(Error::EmptySample { p, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<usize> = match mode {
        SampleMode::WithReplacement => (0..m).map(|_| rng.random_range(0..n)).collect(),
        SampleMode::WithoutReplacement => rand::seq::index::sample(&mut rng, n, m).into_vec(),
    };
    let empty = EmbeddingSet::new(labeled.dim(), Vec::new()).expect("positive dim");
    let index = build_union_index(labeled, &empty, Metric::Cosine)?;
    let lists = index.knn_within_labeled_batch(&centers, k)?;
    let hits = centers
        .iter()
        .zip(&lists)
        .filter(|&(&center, list)| {
            let y = labels.get(center);
            list.ids().all(|id| labels.get(id) == y)
        })
        .count();
    Ok(hits as f64 / m as f64)
}

/// One scanned candidate in a [`KSelectionReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KCandidate {
    pub k: usize,
    /// Measured local-purity rate for this `k`.
    pub mu: f64,
    /// Vote-success factor `I_{1-e}(k + 1 - k', k' + 1)`.
    pub beta: f64,
    /// `mu * beta`, the success lower bound being maximized.
    pub product: f64,
}

/// The result of a candidate scan: every candidate's numbers plus the
/// winner.
#[derive(Debug, Clone, Serialize)]
pub struct KSelectionReport {
    pub candidates: Vec<KCandidate>,
    /// Candidate attaining the maximal product; ties go to the smallest k.
    pub chosen_k: usize,
    pub p: f64,
    pub e: f64,
    pub seed: u64,
}

/// Parameters for [`select_k`]. `new` fills the standard defaults:
/// `p = 0.1`, `e = 0.15`, `k_upper_limit = 20`, sampling with replacement.
#[derive(Debug, Clone)]
pub struct KSelectParams {
    /// Fraction of labeled points sampled as centers per candidate.
    pub p: f64,
    /// Assumed per-vote error rate.
    pub e: f64,
    /// Candidates scanned are `1..k_upper_limit` (exclusive upper end).
    pub k_upper_limit: usize,
    /// Base seed; candidate `k` uses `seed + k`, so candidates are
    /// independent of evaluation order.
    pub seed: u64,
    pub mode: SampleMode,
}

impl KSelectParams {
    pub fn new(seed: u64) -> Self {
        KSelectParams {
            p: 0.1,
            e: 0.15,
            k_upper_limit: 20,
            seed,
            mode: SampleMode::WithReplacement,
        }
    }
}

/// Scans candidates `k = 1..k_upper_limit` and picks the `k` maximizing
/// `mu_k * I_{1-e}(k + 1 - k', k' + 1)`; ties resolve to the smallest
/// candidate. Candidates are evaluated in parallel; the per-candidate
/// seeds make the report independent of scheduling.
pub fn select_k(
    labeled: &EmbeddingSet,
    labels: &LabelVector,
    params: &KSelectParams,
) -> Result<KSelectionReport> {
    if params.k_upper_limit < 2 {
        return Err(Error::DomainError {
            what: format!(
                "k_upper_limit must be at least 2 to scan any candidate, got {}",
                params.k_upper_limit
            ),
        });
    }
    let ks: Vec<usize> = (1..params.k_upper_limit).collect();
    let candidates: Vec<KCandidate> = ks
        .par_iter()
        .map(|&k| {
            let mu = estimate_mu_with_mode(
                labeled,
                labels,
                k,
                params.p,
                params.seed.wrapping_add(k as u64),
                params.mode,
            )?;
            let beta = vote_success_bound(k, params.e)?;
            Ok(KCandidate {
                k,
                mu,
                beta,
                product: mu * beta,
            })
        })
        .collect::<Result<_>>()?;
    let mut chosen_k = candidates[0].k;
    let mut best = candidates[0].product;
    for c in &candidates[1..] {
        if c.product > best {
            best = c.product;
            chosen_k = c.k;
        }
    }
    Ok(KSelectionReport {
        candidates,
        chosen_k,
        p: params.p,
        e: params.e,
        seed: params.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::EmbeddingSet;

    fn set(dim: usize, values: &[f32]) -> EmbeddingSet {
        EmbeddingSet::new(dim, values.to_vec()).unwrap()
    }

    #[test]
    fn beta_with_unit_parameters_is_the_identity() {
        for &x in &[0.0, 0.15, 0.5, 0.85, 0.99, 1.0] {
            assert_eq!(reg_inc_beta(1, 1, x).unwrap(), x);
        }
    }

    #[test]
    fn beta_boundaries_are_exact() {
        for a in 1..=6 {
            for b in 1..=6 {
                assert_eq!(reg_inc_beta(a, b, 0.0).unwrap(), 0.0);
                assert_eq!(reg_inc_beta(a, b, 1.0).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn beta_rejects_out_of_domain_input() {
        assert!(reg_inc_beta(0, 1, 0.5).is_err());
        assert!(reg_inc_beta(1, 0, 0.5).is_err());
        assert!(reg_inc_beta(1, 1, -0.1).is_err());
        assert!(reg_inc_beta(1, 1, 1.1).is_err());
        assert!(reg_inc_beta(1, 1, f64::NAN).is_err());
    }

    #[test]
    fn beta_symmetry_identity_holds() {
        for a in 1..=20 {
            for b in 1..=20 {
                for &x in &[0.15, 0.5, 0.85, 0.99] {
                    let lhs = reg_inc_beta(a, b, x).unwrap();
                    let rhs = reg_inc_beta(b, a, 1.0 - x).unwrap();
                    assert!(
                        (lhs + rhs - 1.0).abs() <= 1e-12,
                        "identity failed at a={a} b={b} x={x}: {lhs} + {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn beta_is_non_decreasing_in_x() {
        for a in 1..=10 {
            for b in 1..=10 {
                let mut prev = 0.0;
                for step in 0..=20 {
                    let x = step as f64 / 20.0;
                    let v = reg_inc_beta(a, b, x).unwrap();
                    assert!(v >= prev - 1e-12, "a={a} b={b} x={x}: {v} < {prev}");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn committee_vote_bound_for_k_three() {
        // k = 3: k' = 1, so the bound is I_{0.85}(3, 2) =
        // P(Bin(4, 0.85) >= 3) = 4 * 0.85^3 * 0.15 + 0.85^4.
        let expected = 4.0 * 0.85f64.powi(3) * 0.15 + 0.85f64.powi(4);
        let got = vote_success_bound(3, 0.15).unwrap();
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn half_committee_matches_the_ceiling_formula() {
        for k in 1..=25usize {
            let direct = (k + 1).div_ceil(2) - 1;
            assert_eq!(half_committee(k), direct);
        }
    }

    #[test]
    fn vote_bound_is_non_decreasing_over_odd_k() {
        let mut prev = 0.0;
        for k in (1..=19).step_by(2) {
            let v = vote_success_bound(k, 0.15).unwrap();
            assert!(v >= prev, "k={k}: {v} < {prev}");
            prev = v;
        }
    }

    /// Two point-like clusters of four identical points each: every
    /// center's nearest neighbors are its exact duplicates, so mu is 1.0
    /// for any k up to cluster size - 1 and 0.0 beyond.
    #[test]
    fn point_like_clusters_have_unit_mu() {
        let mut values = Vec::new();
        for _ in 0..4 {
            values.extend_from_slice(&[1.0f32, 0.0]);
        }
        for _ in 0..4 {
            values.extend_from_slice(&[0.0f32, 1.0]);
        }
        let labeled = set(2, &values);
        let labels = LabelVector::new(vec![0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        for k in 1..=3 {
            let mu = estimate_mu(&labeled, &labels, k, 1.0, 9).unwrap();
            assert_eq!(mu, 1.0, "k = {k}");
        }
        // the 4th neighbor necessarily comes from the other cluster
        assert_eq!(estimate_mu(&labeled, &labels, 4, 1.0, 9).unwrap(), 0.0);
    }

    /// Alternating labels along two rays: every point's nearest neighbor
    /// carries the other label, so mu_1 is 0.
    #[test]
    fn adversarial_alternation_has_zero_mu() {
        // pairs of nearly parallel vectors with opposite labels
        let labeled = set(
            2,
            &[
                1.0, 0.00, 1.0, 0.01, // angle ~ 0, labels 0 and 1
                0.0, 1.00, 0.01, 1.0, // angle ~ 90 degrees, labels 0 and 1
            ],
        );
        let labels = LabelVector::new(vec![0, 1, 0, 1], 2).unwrap();
        assert_eq!(estimate_mu(&labeled, &labels, 1, 1.0, 5).unwrap(), 0.0);
    }

    #[test]
    fn estimate_mu_rejects_bad_parameters() {
        let labeled = set(1, &[1.0, 2.0, 3.0]);
        let labels = LabelVector::new(vec![0, 1, 0], 2).unwrap();
        assert!(matches!(
            estimate_mu(&labeled, &labels, 3, 0.5, 0),
            Err(Error::KTooLarge {
                requested: 3,
                available: 2
            })
        ));
        assert!(matches!(
            estimate_mu(&labeled, &labels, 1, 0.1, 0),
            Err(Error::EmptySample { .. })
        ));
        assert!(estimate_mu(&labeled, &labels, 1, 0.0, 0).is_err());
        assert!(estimate_mu(&labeled, &labels, 1, 1.5, 0).is_err());
    }

    #[test]
    fn estimate_mu_is_seed_deterministic() {
        let mut values = Vec::new();
        for i in 0..30 {
            values.extend_from_slice(&[1.0 + 0.01 * i as f32, 0.5 - 0.01 * i as f32]);
        }
        let labeled = set(2, &values);
        let labels = LabelVector::new((0..30).map(|i| i % 2).collect::<Vec<_>>(), 2).unwrap();
        let a = estimate_mu(&labeled, &labels, 3, 0.5, 42).unwrap();
        let b = estimate_mu(&labeled, &labels, 3, 0.5, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn without_replacement_draws_distinct_centers_deterministically() {
        let mut values = Vec::new();
        for _ in 0..8 {
            values.extend_from_slice(&[1.0f32, 0.0]);
        }
        for _ in 0..8 {
            values.extend_from_slice(&[0.0f32, 1.0]);
        }
        let labeled = set(2, &values);
        let labels =
            LabelVector::new(vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1], 2).unwrap();
        let a = estimate_mu_with_mode(&labeled, &labels, 2, 1.0, 7, SampleMode::WithoutReplacement)
            .unwrap();
        // p = 1.0 without replacement visits every center exactly once;
        // both clusters are pure at k = 2, so mu must be exactly 1
        assert_eq!(a, 1.0);
    }

    #[test]
    fn select_k_on_point_like_clusters_follows_the_vote_bound() {
        // mu is exactly 1 for every candidate k (clusters of 40 points,
        // candidates stop at 19), so the scan reduces to the beta factor
        // alone, which peaks at the largest even candidate.
        let mut values = Vec::new();
        for _ in 0..40 {
            values.extend_from_slice(&[1.0f32, 0.0]);
        }
        for _ in 0..40 {
            values.extend_from_slice(&[0.0f32, 1.0]);
        }
        let labeled = set(2, &values);
        let labels =
            LabelVector::new((0..80).map(|i| usize::from(i >= 40)).collect::<Vec<_>>(), 2).unwrap();
        let report = select_k(&labeled, &labels, &KSelectParams::new(1)).unwrap();
        assert_eq!(report.candidates.len(), 19);
        for c in &report.candidates {
            assert_eq!(c.mu, 1.0, "k = {}", c.k);
            assert_eq!(c.product, c.beta);
        }
        let best_by_beta = report
            .candidates
            .iter()
            .max_by(|a, b| a.beta.partial_cmp(&b.beta).unwrap())
            .unwrap();
        assert_eq!(report.chosen_k, best_by_beta.k);
        assert_eq!(report.chosen_k, 18);
    }

    #[test]
    fn select_k_ties_resolve_to_the_smallest_candidate() {
        // e = 1.0 zeroes every beta factor, so all products tie at 0 and
        // the scan must return the smallest candidate.
        let mut values = Vec::new();
        for _ in 0..20 {
            values.extend_from_slice(&[1.0f32, 0.0]);
        }
        for _ in 0..20 {
            values.extend_from_slice(&[0.0f32, 1.0]);
        }
        let labeled = set(2, &values);
        let labels =
            LabelVector::new((0..40).map(|i| usize::from(i >= 20)).collect::<Vec<_>>(), 2).unwrap();
        let mut params = KSelectParams::new(3);
        params.e = 1.0;
        let report = select_k(&labeled, &labels, &params).unwrap();
        assert_eq!(report.chosen_k, 1);
        for c in &report.candidates {
            assert_eq!(c.product, 0.0);
        }
    }

    #[test]
    fn per_candidate_seeds_decouple_the_estimates() {
        // the mu column of the report equals estimate_mu called by hand
        // with seed + k for each candidate
        let mut values = Vec::new();
        for i in 0..40 {
            let angle = 0.1 * i as f32;
            values.extend_from_slice(&[angle.cos(), angle.sin()]);
        }
        let labeled = set(2, &values);
        let labels =
            LabelVector::new((0..40).map(|i| (i / 10) % 2).collect::<Vec<_>>(), 2).unwrap();
        let params = KSelectParams::new(100);
        let report = select_k(&labeled, &labels, &params).unwrap();
        for c in &report.candidates {
            let standalone =
                estimate_mu(&labeled, &labels, c.k, params.p, 100 + c.k as u64).unwrap();
            assert_eq!(c.mu, standalone, "k = {}", c.k);
            assert_eq!(c.product, c.mu * c.beta);
        }
    }
}
