//! Label assignment and learned filtering of redundant detections.
//!
//! The crate covers the path from a dense, duplicate-heavy set of detections to
//! a clean, NMS-free output:
//!
//! * [`selection`] reduces dense candidates to a sparse query pool (top-k or NMS);
//! * [`ranking`] turns confidence order into ranks and learned rank embeddings;
//! * [`assignment`] labels candidates with greedy matching (one keep per
//!   ground-truth cluster) and provides exact one-to-one Hungarian matching;
//! * [`filtermodel`] is a one-attention-layer filter trained with focal loss on
//!   those labels, which opens a score gap between kept and redundant boxes;
//! * [`evaluation`] measures AP, recall and the ideal-recall oracle;
//! * [`synth`] generates crowded synthetic scenes;
//! * [`harness`] wires everything into the CLI pipeline and sweeps.

pub mod assignment;
pub mod error;
pub mod evaluation;
pub mod filtermodel;
pub mod geometry;
pub mod harness;
pub mod matrix;
pub mod ranking;
pub mod selection;
pub mod synth;

pub use assignment::{
    greedy_match, hungarian, one_to_one_targets, pair_cost, Assignment, CostWeights, Detection,
    GreedyMatchConfig, GroundTruth, LabelAssignment, LabelRecord,
};
pub use error::{Error, Result};
pub use geometry::{giou, iou, BoundingBox};
pub use matrix::Matrix;
pub use ranking::{rank_indices, RankEmbedding};
pub use synth::{Scene, SynthConfig};
