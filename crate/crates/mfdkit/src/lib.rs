//! Detection-pipeline toolkit for two-class (embedded / isolated) formula
//! detection: box geometry, feature-pyramid coverage analysis,
//! positive-sample assignment, side-distribution decoding, NMS / flip-merge
//! / weighted-box-fusion post-processing, and per-class F1 evaluation.
//!
//! Everything operates on plain boxes, scores and class labels — no model
//! inference or image I/O. All operations are pure functions on immutable
//! values and are safe to call concurrently.

pub mod assignment;
pub mod config;
pub mod detection;
pub mod eval;
pub mod geometry;
pub mod gfl;
pub mod io;
pub mod postprocess;
pub mod pyramid;

pub use config::RunConfig;
pub use detection::{Detection, FusedDetection, GroundTruth, PredictionRecord};
pub use geometry::{BBox, FormulaClass};
pub use pyramid::{GridPoint, PyramidSpec};
