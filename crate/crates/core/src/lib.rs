//! Validation of one labeled object-detection dataset against another by
//! comparing statistical distributions of per-object performance over
//! batches of context-similar objects.
//!
//! The building blocks, bottom to top:
//!
//! - [`dataset`]: the data model and its invariants; [`io_yolo`] loads and
//!   writes the on-disk directory format.
//! - [`eval`]: per-object IOU performance via greedy prediction matching.
//! - [`context`]: object-centered ground-truth patch masks and their
//!   similarity factor, which decides batch membership.
//! - [`stats`]: exact empirical 1-Wasserstein distance and mean-difference
//!   comparisons.
//! - [`pipeline`]: the full comparison over two datasets, threshold and
//!   patch-size sweeps, and the point-wise twin comparison.
//! - [`synthgen`]: deterministic synthetic scenes and corrupted prediction
//!   sets for controlled verification.
//! - [`report`]: canonical JSON documents and plot-ready CSV output.

pub mod context;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io_yolo;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synthgen;

pub use context::{build_batch, extract_patch_mask, similarity, PatchMask, PatchSpec};
pub use dataset::{
    dataset_summary, validate_dataset, BoundingBox, ClassDef, ClassId, Dataset, DatasetSummary,
    GroundTruthObject, ImageRecord, ObjectId, Prediction, Violation,
};
pub use error::{Error, Result};
pub use eval::{box_iou, match_predictions, object_performance, MatchAssignment, PerformanceTable};
pub use io_yolo::{load_dataset, read_yolo_dir, write_yolo_dir, DatasetFormat};
pub use pipeline::{
    compare, pointwise_compare, sweep_patch, sweep_theta, BatchRecord, ClassComparison,
    CompareConfig, CompareReport, PatchSweepRow, PointwiseReport, Reduction, ThetaSweepRow,
};
pub use stats::{mean_abs_diff_of_means, pointwise_mean_diff, wasserstein1, SampleSet};
pub use synthgen::{
    generate_dataset, perturb_layout, synthesize_predictions, CorruptionModel, GeneratedDataset,
    Placement, ScenarioConfig,
};
