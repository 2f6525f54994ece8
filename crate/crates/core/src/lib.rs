//! Pixel consensus voting for panoptic segmentation.
//!
//! Pixels vote for the discretized location of their instance centroid. The
//! votes are accumulated into a heatmap, thresholded into peak regions, and
//! each peak backprojects the pixels that voted for it into an instance mask.
//! Masks are fused with a semantic map into a panoptic output and scored with
//! panoptic quality.
//!
//! The pipeline here is driven by injected per-pixel labels: either targets
//! derived from ground truth ("oracle" inference) or probability tensors
//! produced elsewhere.

pub mod aggregate;
pub mod backproject;
pub mod encode;
pub mod error;
pub mod fuse;
pub mod grid;
pub mod harness;
pub mod lossnorm;
pub mod metrics;
pub mod panoptic;
pub mod panoptic_io;
pub mod peaks;
pub mod pipeline;
pub mod synth;
pub mod tensor_io;

pub use aggregate::{aggregate_votes, brute_force_aggregate, Heatmap, VoteTensor};
pub use backproject::{backproject, top_votes, InstanceMask, TopVotes};
pub use encode::{centroid, encode_labels, LabelField, VoteTarget};
pub use error::{Error, Result};
pub use fuse::{assign_category, fuse, FuseConfig};
pub use grid::{build_grid, invert_grid, CellTable, GridScheme, GridSpec, Ring};
pub use lossnorm::{normalized_loss, segment_weights, SegmentWeights};
pub use metrics::{evaluate, PqStats, PqSummary};
pub use panoptic::{Category, CategoryTable, PanopticAnnotation, PanopticMap, SegmentInfo};
pub use peaks::{find_peaks, Connectivity, PeakRegion};
pub use pipeline::{infer, InferenceConfig, InferenceOutput, Pipeline};
pub use synth::{generate, oracle_run, OracleOutcome, SceneSpec};

/// Pixel coordinate as `(row, col)`.
pub type Pixel = (usize, usize);
