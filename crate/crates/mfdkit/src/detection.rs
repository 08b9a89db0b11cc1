//! Detection and ground-truth records shared across the pipeline.

use thiserror::Error;

use crate::geometry::{BBox, FormulaClass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("confidence score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
}

/// A scored, classified box produced by one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    bbox: BBox,
    class: FormulaClass,
    score: f64,
    model_id: u32,
}

impl Detection {
    /// `model_id` identifies the source model in an ensemble; 0 when there
    /// is a single source.
    pub fn new(
        bbox: BBox,
        class: FormulaClass,
        score: f64,
        model_id: u32,
    ) -> Result<Self, DetectionError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(DetectionError::ScoreOutOfRange(score));
        }
        Ok(Self { bbox, class, score, model_id })
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn class(&self) -> FormulaClass {
        self.class
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn model_id(&self) -> u32 {
        self.model_id
    }

    /// Same detection with the box replaced (used when mapping boxes back
    /// from a flipped image).
    pub fn with_bbox(&self, bbox: BBox) -> Self {
        Self { bbox, ..self.clone() }
    }
}

/// A detection produced by fusing a cluster of source detections.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedDetection {
    pub detection: Detection,
    /// Number of source boxes merged into this one; at least 1.
    pub cluster_size: usize,
}

/// One annotated formula instance on a page.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub page_id: String,
    pub class: FormulaClass,
    pub bbox: BBox,
}

/// A detection tied to the page it was predicted on.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub page_id: String,
    pub detection: Detection,
}
