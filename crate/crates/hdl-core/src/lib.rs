//! Batch pseudo-labeling for embedding sets.
//!
//! Given a small labeled embedding set and a batch of unlabeled
//! embeddings, this crate assigns a class to every unlabeled point by
//! nearest-neighbor voting. Two labelers share the same exact brute-force
//! k-NN machinery:
//!
//! * [`run_knn_dv`] — direct voting: each point polls its `k` nearest
//!   *labeled* points, independently of every other point;
//! * [`run_hdl`] — hierarchical dynamic labeling: neighbor lists span the
//!   labeled/unlabeled union, points with the best-labeled neighborhoods
//!   are labeled first, and every fresh label immediately strengthens the
//!   neighborhoods of the points still waiting.
//!
//! [`select_k`] picks the neighborhood size by scanning candidates and
//! maximizing a measured local-purity rate times a closed-form
//! vote-success bound ([`reg_inc_beta`]).
//!
//! Everything is deterministic by construction: seeded ChaCha streams,
//! `f64` accumulation over the stored `f32` values in a fixed order, and
//! explicit `(distance, id)` / `(score, id)` tie rules. Reruns with equal
//! inputs, seeds, and flags produce bit-identical outputs at any thread
//! count.
//!
//! File formats (binary embeddings, label CSV, output CSV) live in
//! [`store`]; synthetic cluster generation and accuracy scoring in
//! [`synth`].

pub mod adaptive;
pub mod error;
pub mod hdl;
pub mod knn;
pub mod knn_dv;
pub mod store;
pub mod synth;
pub mod vote;

pub use adaptive::{
    estimate_mu, estimate_mu_with_mode, half_committee, reg_inc_beta, select_k, vote_success_bound,
    KCandidate, KSelectParams, KSelectionReport, SampleMode,
};
pub use error::{Error, Result};
pub use hdl::{
    labeled_neighbor_counts, run_hdl, second_level_order, select_first_level, LabelStatus,
    LevelPlan,
};
pub use knn::{build_union_index, Metric, Neighbor, NeighborList, UnionIndex};
pub use knn_dv::run_knn_dv;
pub use store::{
    load_embeddings, load_labels, load_output, write_embeddings, write_labels, write_output,
    EmbeddingSet, LabelVector, LabeledOutput, OutputRecord,
};
pub use synth::{evaluate, generate, EvalResult, SynthData, SynthSpec};
pub use vote::{vote, VoteTally};
