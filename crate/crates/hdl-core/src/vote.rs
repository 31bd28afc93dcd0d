//! Unweighted majority voting over a closed label space.
//!
//! A vote tallies the class labels of a voter set and picks the class with
//! the most votes; on a tie the smallest class id wins, deterministically.
//! This is equivalent to averaging one-hot label vectors and taking the
//! argmax — the averaging denominator is shared, so it cannot change the
//! winner — but integer counts avoid any float comparison.

use crate::error::{Error, Result};

/// The outcome of one majority vote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTally {
    /// Votes per class, length `num_classes`.
    pub counts: Vec<usize>,
    /// The winning class: smallest class id attaining the maximum count.
    pub winner: usize,
    /// Number of voters (`counts` sums to this).
    pub voters: usize,
    /// `true` when more than one class attains the maximum count. The
    /// winner is still well defined; the flag is kept for audit output.
    pub tied: bool,
}

impl VoteTally {
    /// Winning vote fraction, `counts[winner] / voters`, in `(0, 1]`.
    pub fn margin(&self) -> f64 {
        self.counts[self.winner] as f64 / self.voters as f64
    }
}

/// Tallies an unweighted majority vote.
///
/// Every label must lie in `[0, num_classes)`; the voter set must be
/// non-empty.
pub fn vote(voter_labels: &[usize], num_classes: usize) -> Result<VoteTally> {
    if voter_labels.is_empty() {
        return Err(Error::EmptyVoterSet);
    }
    let mut counts = vec![0usize; num_classes];
    for &label in voter_labels {
        counts[label] += 1;
    }
    let mut winner = 0;
    for class in 1..num_classes {
        if counts[class] > counts[winner] {
            winner = class;
        }
    }
    let top = counts[winner];
    let tied = counts.iter().filter(|&&c| c == top).count() > 1;
    Ok(VoteTally {
        counts,
        winner,
        voters: voter_labels.len(),
        tied,
    })
}
