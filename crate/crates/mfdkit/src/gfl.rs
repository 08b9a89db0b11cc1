//! Decoding of discrete side-offset distributions into box extents.
//!
//! A regression head predicts, for each box side, a probability distribution
//! over `regmax + 1` integer offset bins. The decoded offset is the
//! distribution's expectation scaled by the level stride, so the largest
//! reachable offset is `regmax * stride` per side and a box side saturates
//! at `2 * regmax * stride`.

use thiserror::Error;

use crate::geometry::{BBox, GeometryError};
use crate::pyramid::{stride, GridPoint, PyramidSpec};

/// Slack allowed on the probability sum, absorbing serialization rounding.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GflError {
    #[error("distribution needs at least 2 bins (regmax >= 1), got {0}")]
    TooFewBins(usize),
    #[error("probability at bin {index} is invalid: {value}")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1 within {NORMALIZATION_TOLERANCE}")]
    NotNormalized(f64),
    #[error("bin {bin} out of range for regmax {regmax}")]
    BinOutOfRange { bin: usize, regmax: u32 },
    #[error("grid point level {0} is not part of the pyramid")]
    LevelNotInPyramid(u8),
    #[error("distribution has regmax {actual}, pyramid expects {expected}")]
    RegmaxMismatch { expected: u32, actual: u32 },
    #[error("grid point coordinates must be finite, got ({x}, {y})")]
    NonFinitePoint { x: f64, y: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Probabilities over integer offset bins `0..=regmax` for one box side.
/// Validated at construction: nonnegative entries summing to 1 within
/// [`NORMALIZATION_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct SideDistribution {
    probs: Vec<f64>,
}

impl SideDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, GflError> {
        if probs.len() < 2 {
            return Err(GflError::TooFewBins(probs.len()));
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(GflError::InvalidProbability { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(GflError::NotNormalized(sum));
        }
        Ok(Self { probs })
    }

    /// All mass on a single bin.
    pub fn one_hot(bin: usize, regmax: u32) -> Result<Self, GflError> {
        if bin > regmax as usize {
            return Err(GflError::BinOutOfRange { bin, regmax });
        }
        let mut probs = vec![0.0; regmax as usize + 1];
        probs[bin] = 1.0;
        Self::new(probs)
    }

    pub fn regmax(&self) -> u32 {
        (self.probs.len() - 1) as u32
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Expected offset of the distribution in pixels: `stride * sum(i * p_i)`,
/// clamped into `[0, regmax * stride]` so rounding within the normalization
/// tolerance cannot push the result past the saturation bound.
pub fn decode_side(dist: &SideDistribution, stride: f64) -> f64 {
    let expectation: f64 = dist
        .probs
        .iter()
        .enumerate()
        .map(|(i, &p)| i as f64 * p)
        .sum();
    (expectation * stride).clamp(0.0, f64::from(dist.regmax()) * stride)
}

/// Assembles a box from four decoded side offsets around a grid point, in
/// `left, top, right, bottom` order. When `image_bounds = (width, height)`
/// is supplied the box is clipped to the image.
pub fn decode_box(
    point: &GridPoint,
    left: &SideDistribution,
    top: &SideDistribution,
    right: &SideDistribution,
    bottom: &SideDistribution,
    spec: &PyramidSpec,
    image_bounds: Option<(f64, f64)>,
) -> Result<BBox, GflError> {
    if !point.x.is_finite() || !point.y.is_finite() {
        return Err(GflError::NonFinitePoint { x: point.x, y: point.y });
    }
    if !spec.contains_level(point.level) {
        return Err(GflError::LevelNotInPyramid(point.level));
    }
    for dist in [left, top, right, bottom] {
        if dist.regmax() != spec.regmax() {
            return Err(GflError::RegmaxMismatch {
                expected: spec.regmax(),
                actual: dist.regmax(),
            });
        }
    }
    let s = stride(point.level);
    let bbox = BBox::new(
        point.x - decode_side(left, s),
        point.y - decode_side(top, s),
        point.x + decode_side(right, s),
        point.y + decode_side(bottom, s),
    )?;
    Ok(match image_bounds {
        Some((w, h)) => bbox.clip(w, h),
        None => bbox,
    })
}
