//! Seeded synthetic embedding sets and accuracy evaluation.
//!
//! The generator draws isotropic Gaussian clusters, one per class. By
//! default class `c` is centered at `radius * e_c` (a scaled one-hot
//! corner), which keeps the between-class separation controllable in any
//! dimension; explicit means can override this. Per-class counts are free,
//! so long-tailed class profiles are one spec away.
//!
//! Sampling uses a ChaCha8 stream seeded from the spec (values drawn
//! class-major, row-major, component-major) with the ziggurat standard
//! normal from `rand_distr`, so a spec reproduces its data bit-exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::store::{EmbeddingSet, LabelVector, LabeledOutput};

/// Full description of a synthetic labeled/unlabeled pair.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub dim: usize,
    /// Points per class, length `num_classes`, all positive.
    pub per_class: Vec<usize>,
    /// Cluster means; `None` selects `radius * e_c` (requires
    /// `dim >= num_classes`).
    pub means: Option<Vec<Vec<f32>>>,
    /// Scale of the default one-hot means.
    pub radius: f32,
    /// Isotropic standard deviation shared by every cluster.
    pub sigma: f32,
    /// Fraction of each class that lands in the labeled set; the labeled
    /// count is `ceil(count * fraction)`, so every class keeps at least
    /// one labeled point.
    pub labeled_fraction: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// A balanced spec with default one-hot means.
    pub fn balanced(
        num_classes: usize,
        dim: usize,
        count_per_class: usize,
        sigma: f32,
        labeled_fraction: f64,
        seed: u64,
    ) -> Self {
        SynthSpec {
            num_classes,
            dim,
            per_class: vec![count_per_class; num_classes],
            means: None,
            radius: 4.0,
            sigma,
            labeled_fraction,
            seed,
        }
    }

    /// Ratio of the largest to the smallest class count.
    pub fn imbalance_factor(&self) -> f64 {
        let max = self.per_class.iter().max().copied().unwrap_or(0);
        let min = self.per_class.iter().min().copied().unwrap_or(0);
        max as f64 / min as f64
    }
}

/// What [`generate`] produces: a labeled set with labels, an unlabeled set,
/// and the ground truth of the unlabeled rows.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub labeled: EmbeddingSet,
    pub labels: LabelVector,
    pub unlabeled: EmbeddingSet,
    pub truth: LabelVector,
}

/// `ceil(count * fraction)` with products that are within 1e-9 of an
/// integer treated as that integer, so decimal fractions behave the way
/// they read (0.1 of 600 is 60, not 61).
fn ceil_fraction(count: usize, fraction: f64) -> usize {
    let t = count as f64 * fraction;
    if (t - t.round()).abs() < 1e-9 {
        t.round() as usize
    } else {
        t.ceil() as usize
    }
}

/// Draws the spec'd clusters and splits each class: the first
/// `ceil(count * fraction)` generated rows are labeled, the rest carry
/// ground truth only. Identical specs produce bit-identical sets.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    if spec.num_classes < 2 {
        return Err(Error::InvalidSpec {
            reason: format!("need at least two classes, got {}", spec.num_classes),
        });
    }
    if spec.dim == 0 {
        return Err(Error::InvalidSpec {
            reason: "dimension must be positive".into(),
        });
    }
    if spec.per_class.len() != spec.num_classes {
        return Err(Error::InvalidSpec {
            reason: format!(
                "per_class has {} entries for {} classes",
                spec.per_class.len(),
                spec.num_classes
            ),
        });
    }
    if spec.per_class.contains(&0) {
        return Err(Error::InvalidSpec {
            reason: "every class needs at least one point".into(),
        });
    }
    if !(spec.sigma.is_finite() && spec.sigma >= 0.0) {
        return Err(Error::InvalidSpec {
            reason: format!("sigma must be finite and non-negative, got {}", spec.sigma),
        });
    }
    if !(spec.labeled_fraction > 0.0 && spec.labeled_fraction <= 1.0) {
        return Err(Error::InvalidSpec {
            reason: format!(
                "labeled_fraction must lie in (0, 1], got {}",
                spec.labeled_fraction
            ),
        });
    }
    let means: Vec<Vec<f32>> = match &spec.means {
        Some(m) => {
            if m.len() != spec.num_classes {
                return Err(Error::InvalidSpec {
                    reason: format!("{} means for {} classes", m.len(), spec.num_classes),
                });
            }
            if m.iter().any(|row| row.len() != spec.dim) {
                return Err(Error::InvalidSpec {
                    reason: "every mean must have the spec dimension".into(),
                });
            }
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec {
                    reason: "means must be finite".into(),
                });
            }
            m.clone()
        }
        None => {
            if spec.dim < spec.num_classes {
                return Err(Error::InvalidSpec {
                    reason: format!(
                        "one-hot means need dim >= num_classes ({} < {}); pass explicit means",
                        spec.dim, spec.num_classes
                    ),
                });
            }
            if !(spec.radius.is_finite() && spec.radius > 0.0) {
                return Err(Error::InvalidSpec {
                    reason: format!("radius must be finite and positive, got {}", spec.radius),
                });
            }
            (0..spec.num_classes)
                .map(|c| {
                    let mut mean = vec![0.0f32; spec.dim];
                    mean[c] = spec.radius;
                    mean
                })
                .collect()
        }
    };
    if spec.sigma == 0.0 && means.iter().any(|m| m.iter().all(|&v| v == 0.0)) {
        return Err(Error::InvalidSpec {
            reason: "sigma = 0 with a zero mean would generate zero-norm rows".into(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sigma = spec.sigma as f64;
    let mut labeled_data = Vec::new();
    let mut labels = Vec::new();
    let mut unlabeled_data = Vec::new();
    let mut truth = Vec::new();
    for (class, (&count, mean)) in spec.per_class.iter().zip(&means).enumerate() {
        let labeled_count = ceil_fraction(count, spec.labeled_fraction);
        for row in 0..count {
            let target = if row < labeled_count {
                labels.push(class);
                &mut labeled_data
            } else {
                truth.push(class);
                &mut unlabeled_data
            };
            for &mu in mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                target.push((mu as f64 + sigma * z) as f32);
            }
        }
    }
    Ok(SynthData {
        labeled: EmbeddingSet::new(spec.dim, labeled_data)?,
        labels: LabelVector::new(labels, spec.num_classes)?,
        unlabeled: EmbeddingSet::new(spec.dim, unlabeled_data)?,
        truth: LabelVector::new(truth, spec.num_classes)?,
    })
}

/// Accuracy summary of a labeling run against ground truth.
#[derive(Debug, Clone, Serialize)]
pub struct EvalResult {
    /// Name of the method being scored (caller-supplied, e.g. "hdl").
    pub method: String,
    /// Overall accuracy; defined as 1.0 for an empty evaluation.
    pub accuracy: f64,
    /// Per-class accuracy, `null`/`None` for classes absent from the truth.
    pub per_class: Vec<Option<f64>>,
    /// `confusion[t][p]` counts truth-class-`t` points predicted as `p`.
    pub confusion: Vec<Vec<usize>>,
}

/// Scores a labeling output against the ground truth of the same rows.
pub fn evaluate(output: &LabeledOutput, truth: &LabelVector, method: &str) -> Result<EvalResult> {
    if output.records.len() != truth.len() {
        return Err(Error::CountMismatch {
            expected: truth.len(),
            found: output.records.len(),
        });
    }
    output.validate()?;
    let num_classes = output
        .records
        .iter()
        .map(|r| r.label + 1)
        .chain([truth.num_classes()])
        .max()
        .unwrap_or(truth.num_classes());
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for record in &output.records {
        confusion[truth.get(record.index)][record.label] += 1;
    }
    let total = output.records.len();
    let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
    let accuracy = if total == 0 {
        1.0
    } else {
        correct as f64 / total as f64
    };
    let per_class = (0..num_classes)
        .map(|c| {
            let row_total: usize = confusion[c].iter().sum();
            (row_total > 0).then(|| confusion[c][c] as f64 / row_total as f64)
        })
        .collect();
    Ok(EvalResult {
        method: method.to_string(),
        accuracy,
        per_class,
        confusion,
    })
}
