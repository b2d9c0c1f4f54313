//! Cross-modal weak supervision.
//!
//! Labeling functions are mined over a labeled dev set from an existing
//! modality, extended to a new modality through a similarity graph, combined
//! by a generative label model, and used to train discriminative models that
//! fuse both modalities.

pub mod encoding;
pub mod error;
pub mod graph;
pub mod label_model;
pub mod lf;
pub mod metrics;
mod par;
pub mod synth;
pub mod train;
pub mod types;

pub use encoding::{fit_encoding, Encoding};
pub use error::{Error, Result};
pub use graph::{build_graph, compute_weight, propagate, tune_thresholds, GraphConfig, PropagationScores, SimilarityGraph};
pub use lf::{apply_lf, evaluate_lf, mine_lfs, LabelingFunction, LfStats, MinerConfig};
pub use types::{DataPoint, Dataset, FeatureSchema, FeatureValue, Label, Split};
