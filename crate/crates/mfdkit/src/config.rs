//! Pipeline defaults shared by the CLI subcommands.

use thiserror::Error;

use crate::pyramid::{PyramidError, PyramidSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{name} threshold {value} outside [0, 1]")]
    ThresholdOutOfRange { name: &'static str, value: f64 },
    #[error("atss_k must be at least 1")]
    InvalidK,
    #[error("image size {width}x{height} must be positive")]
    InvalidImageSize { width: f64, height: f64 },
    #[error(transparent)]
    Pyramid(#[from] PyramidError),
}

/// Run-wide defaults: pyramid levels 2-6 with 24 offset bins, 9 assignment
/// candidates per level, IoU thresholds 0.6 (NMS), 0.4 (fusion) and
/// 0.5 (evaluation), and a 1583x2048 test-page size.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub levels: Vec<u8>,
    pub regmax: u32,
    pub atss_k: usize,
    pub nms_iou: f64,
    pub wbf_iou: f64,
    pub eval_iou: f64,
    pub image_width: f64,
    pub image_height: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            levels: vec![2, 3, 4, 5, 6],
            regmax: 24,
            atss_k: 9,
            nms_iou: 0.6,
            wbf_iou: 0.4,
            eval_iou: 0.5,
            image_width: 1583.0,
            image_height: 2048.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("nms_iou", self.nms_iou),
            ("wbf_iou", self.wbf_iou),
            ("eval_iou", self.eval_iou),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::ThresholdOutOfRange { name, value });
            }
        }
        if self.atss_k < 1 {
            return Err(ConfigError::InvalidK);
        }
        if !(self.image_width > 0.0) || !(self.image_height > 0.0) {
            return Err(ConfigError::InvalidImageSize {
                width: self.image_width,
                height: self.image_height,
            });
        }
        self.pyramid()?;
        Ok(())
    }

    pub fn pyramid(&self) -> Result<PyramidSpec, PyramidError> {
        PyramidSpec::new(self.levels.clone(), self.regmax)
    }
}
