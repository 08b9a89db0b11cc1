//! Feature-pyramid geometry: grid-point lattices, detectability limits and
//! regression-extent analysis.
//!
//! A pyramid level `l` has stride `2^l`. Two rules bound what a level can
//! represent:
//!
//! * detectability — a box is resolvable at a level only if its short side
//!   spans at least [`DETECTABILITY_CELLS`] feature-map cells, i.e.
//!   `short_side >= 3 * stride`;
//! * regressability — a side is reachable only up to `2 * regmax * stride`,
//!   the extent when the offset distributions of both opposing sides
//!   saturate at the last bin.
//!
//! [`coverage_report`] combines both into a single per-level predicate and
//! flags ground-truth instances no level can represent.

use thiserror::Error;

use crate::detection::GroundTruth;
use crate::geometry::FormulaClass;

pub const MIN_LEVEL: u8 = 1;
pub const MAX_LEVEL: u8 = 8;

/// Feature-map cells a box's short side must span to be detectable.
pub const DETECTABILITY_CELLS: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PyramidError {
    #[error(
        "pyramid levels must be nonempty and strictly increasing within \
         {MIN_LEVEL}..={MAX_LEVEL}, got {0:?}"
    )]
    InvalidLevels(Vec<u8>),
    #[error("regmax must be at least 1, got {0}")]
    InvalidRegmax(u32),
}

/// Downsampling factor of a pyramid level.
pub fn stride(level: u8) -> f64 {
    2f64.powi(i32::from(level))
}

/// Largest box side reachable at a level: both opposing side offsets
/// saturated at `regmax` bins.
pub fn max_regressable_side(level: u8, regmax: u32) -> f64 {
    2.0 * f64::from(regmax) * stride(level)
}

/// An ordered set of pyramid levels with a shared offset-bin count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PyramidSpec {
    levels: Vec<u8>,
    regmax: u32,
}

impl PyramidSpec {
    pub fn new(levels: Vec<u8>, regmax: u32) -> Result<Self, PyramidError> {
        let ordered = levels.windows(2).all(|w| w[0] < w[1]);
        let in_range = levels.iter().all(|&l| (MIN_LEVEL..=MAX_LEVEL).contains(&l));
        if levels.is_empty() || !ordered || !in_range {
            return Err(PyramidError::InvalidLevels(levels));
        }
        if regmax < 1 {
            return Err(PyramidError::InvalidRegmax(regmax));
        }
        Ok(Self { levels, regmax })
    }

    /// Contiguous level range, e.g. `from_range(2, 6, 24)` for levels 2-6.
    pub fn from_range(first: u8, last: u8, regmax: u32) -> Result<Self, PyramidError> {
        if first > last {
            return Err(PyramidError::InvalidLevels(vec![first, last]));
        }
        Self::new((first..=last).collect(), regmax)
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn regmax(&self) -> u32 {
        self.regmax
    }

    pub fn contains_level(&self, level: u8) -> bool {
        self.levels.contains(&level)
    }

    /// Smallest short side any level of this pyramid can detect:
    /// 3 cells at the finest stride.
    pub fn min_detectable_short_side(&self) -> f64 {
        DETECTABILITY_CELLS * stride(self.levels[0])
    }

    pub fn max_regressable_side(&self, level: u8) -> f64 {
        max_regressable_side(level, self.regmax)
    }
}

/// Center of one feature-map cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    pub level: u8,
}

/// All cell centers `(stride * (i + 0.5), stride * (j + 0.5))` strictly
/// inside the image, in row-major order. Empty when the stride exceeds the
/// image or a dimension is not positive.
pub fn grid_points(level: u8, image_w: f64, image_h: f64) -> Vec<GridPoint> {
    let s = stride(level);
    let mut points = Vec::new();
    if !(image_w > 0.0) || !(image_h > 0.0) {
        return points;
    }
    let mut j = 0u64;
    loop {
        let y = (j as f64 + 0.5) * s;
        if y >= image_h {
            break;
        }
        let mut i = 0u64;
        loop {
            let x = (i as f64 + 0.5) * s;
            if x >= image_w {
                break;
            }
            points.push(GridPoint { x, y, level });
            i += 1;
        }
        j += 1;
    }
    points
}

/// Level placement of one ground-truth instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GtCoverage {
    pub page_id: String,
    pub class: FormulaClass,
    pub short_side: f64,
    /// Levels on which the instance is both detectable and regressable.
    pub levels: Vec<u8>,
}

impl GtCoverage {
    pub fn detectable(&self) -> bool {
        !self.levels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CoverageSummary {
    pub total: usize,
    /// Instances whose level set is empty.
    pub undetectable: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    /// One entry per ground-truth instance, in input order.
    pub rows: Vec<GtCoverage>,
    pub embedded: CoverageSummary,
    pub isolated: CoverageSummary,
}

impl CoverageReport {
    pub fn summary(&self, class: FormulaClass) -> CoverageSummary {
        match class {
            FormulaClass::Embedded => self.embedded,
            FormulaClass::Isolated => self.isolated,
        }
    }
}

/// For each instance, the set of levels able to represent it: short side at
/// least `3 * stride` and long side at most `2 * regmax * stride`.
pub fn coverage_report(gts: &[GroundTruth], spec: &PyramidSpec) -> CoverageReport {
    let mut rows = Vec::with_capacity(gts.len());
    let mut embedded = CoverageSummary::default();
    let mut isolated = CoverageSummary::default();
    for gt in gts {
        let short = gt.bbox.short_side();
        let long = gt.bbox.long_side();
        let levels: Vec<u8> = spec
            .levels()
            .iter()
            .copied()
            .filter(|&l| {
                short >= DETECTABILITY_CELLS * stride(l) && long <= spec.max_regressable_side(l)
            })
            .collect();
        let summary = match gt.class {
            FormulaClass::Embedded => &mut embedded,
            FormulaClass::Isolated => &mut isolated,
        };
        summary.total += 1;
        if levels.is_empty() {
            summary.undetectable += 1;
        }
        rows.push(GtCoverage {
            page_id: gt.page_id.clone(),
            class: gt.class,
            short_side: short,
            levels,
        });
    }
    CoverageReport { rows, embedded, isolated }
}
