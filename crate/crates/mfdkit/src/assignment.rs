//! Positive-sample assignment over the pyramid lattice.
//!
//! Two strategies are implemented on the same grid of cell centers:
//!
//! * [`random_assign`] — the containment baseline: a point supervises an
//!   instance iff it falls strictly inside its box, so the number of
//!   positives grows with instance area and tiny instances can end up with
//!   none;
//! * [`atss_assign`] — adaptive selection: per level, the `k` points closest
//!   to the instance center become candidates, pseudo-anchors centered on
//!   them are scored by IoU against the instance, and candidates at or above
//!   `mean + std` of those IoUs (population std) whose point lies strictly
//!   inside the box become positives. Every instance draws the same number
//!   of candidates regardless of its area.
//!
//! Both resolve points claimed by several instances deterministically, and
//! [`imbalance_stats`] quantifies the area/positive-count relationship the
//! two strategies produce.

use std::collections::BTreeMap;
use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::BBox;
use crate::pyramid::{grid_points, stride, GridPoint, PyramidSpec};

/// Pseudo-anchor side length in feature-map cells: candidate points carry a
/// square anchor of side `8 * stride` for IoU scoring.
pub const PSEUDO_ANCHOR_CELLS: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("candidate count k must be at least 1")]
    InvalidK,
}

/// Assignment outcome for one ground-truth box.
#[derive(Debug, Clone, PartialEq)]
pub struct GtAssignment {
    /// Points supervising this instance, in lattice order (levels in spec
    /// order, row-major within a level).
    pub positives: Vec<GridPoint>,
    /// Candidates examined for this instance. For the adaptive strategy this
    /// is `sum over levels of min(k, points on level)`; for the containment
    /// baseline it is the number of points strictly inside the box.
    pub candidate_count: usize,
    /// IoU cut applied to candidates (0 for the containment baseline).
    pub iou_threshold: f64,
}

/// Per-instance assignments; indices parallel the input box list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssignmentResult {
    pub per_gt: Vec<GtAssignment>,
}

impl AssignmentResult {
    pub fn positive_counts(&self) -> Vec<usize> {
        self.per_gt.iter().map(|g| g.positives.len()).collect()
    }
}

/// Containment baseline: a grid point (any level) is positive for a box iff
/// it lies strictly inside it; points inside several boxes go to the one
/// with the smallest area (ties to the earlier box).
pub fn random_assign(
    gts: &[BBox],
    spec: &PyramidSpec,
    image_w: f64,
    image_h: f64,
) -> AssignmentResult {
    let mut per_gt: Vec<GtAssignment> = gts
        .iter()
        .map(|_| GtAssignment {
            positives: Vec::new(),
            candidate_count: 0,
            iou_threshold: 0.0,
        })
        .collect();

    for &level in spec.levels() {
        for point in grid_points(level, image_w, image_h) {
            let mut owner: Option<usize> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if !gt.contains_strict(point.x, point.y) {
                    continue;
                }
                per_gt[gi].candidate_count += 1;
                owner = match owner {
                    Some(best) if gts[best].area() <= gt.area() => Some(best),
                    _ => Some(gi),
                };
            }
            if let Some(gi) = owner {
                per_gt[gi].positives.push(point);
            }
        }
    }
    AssignmentResult { per_gt }
}

/// Adaptive assignment: top-`k` center-distance candidates per level,
/// thresholded at mean + population std of their pseudo-anchor IoUs.
pub fn atss_assign(
    gts: &[BBox],
    spec: &PyramidSpec,
    image_w: f64,
    image_h: f64,
    k: usize,
) -> Result<AssignmentResult, AssignmentError> {
    if k < 1 {
        return Err(AssignmentError::InvalidK);
    }

    // Lattice with stable global indices: levels in spec order, row-major
    // within a level. All ordering below falls back to this index.
    let mut points: Vec<GridPoint> = Vec::new();
    let mut level_ranges: Vec<(usize, usize)> = Vec::new();
    for &level in spec.levels() {
        let start = points.len();
        points.extend(grid_points(level, image_w, image_h));
        level_ranges.push((start, points.len()));
    }

    struct Candidate {
        point_idx: usize,
        iou: f64,
    }

    let mut raw: Vec<(usize, f64, usize)> = Vec::new(); // (point_idx, iou, gt_idx)
    let mut per_gt: Vec<GtAssignment> = Vec::with_capacity(gts.len());

    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(points.len());
    for (gi, gt) in gts.iter().enumerate() {
        let (cx, cy) = gt.center();
        let mut candidates: Vec<Candidate> = Vec::new();
        for &(start, end) in &level_ranges {
            scratch.clear();
            for idx in start..end {
                let p = &points[idx];
                let d2 = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy);
                scratch.push((d2, idx));
            }
            let take = k.min(scratch.len());
            if take == 0 {
                continue;
            }
            if take < scratch.len() {
                scratch.select_nth_unstable_by(take - 1, |a, b| {
                    a.partial_cmp(b).expect("finite distances")
                });
                scratch.truncate(take);
            }
            // Candidate order is part of the contract: closest first, ties by
            // lattice index.
            scratch.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            for &(_, idx) in scratch.iter() {
                let p = &points[idx];
                let half = PSEUDO_ANCHOR_CELLS * stride(p.level) / 2.0;
                let anchor = BBox::new(p.x - half, p.y - half, p.x + half, p.y + half)
                    .expect("pseudo-anchor is a valid box");
                candidates.push(Candidate { point_idx: idx, iou: anchor.iou(gt) });
            }
        }

        let n = candidates.len();
        let threshold = if n == 0 {
            0.0
        } else {
            let mean = candidates.iter().map(|c| c.iou).sum::<f64>() / n as f64;
            let var = candidates
                .iter()
                .map(|c| (c.iou - mean) * (c.iou - mean))
                .sum::<f64>()
                / n as f64;
            mean + var.sqrt()
        };

        for c in &candidates {
            let p = &points[c.point_idx];
            if c.iou >= threshold && gt.contains_strict(p.x, p.y) {
                raw.push((c.point_idx, c.iou, gi));
            }
        }
        per_gt.push(GtAssignment {
            positives: Vec::new(),
            candidate_count: n,
            iou_threshold: threshold,
        });
    }

    // A point claimed by several instances goes to the highest anchor IoU;
    // ties to the smaller box area, then the earlier instance.
    let mut claims: HashMap<usize, (f64, usize)> = HashMap::new();
    for &(point_idx, iou, gi) in &raw {
        match claims.get(&point_idx) {
            Some(&(best_iou, best_gi)) => {
                let better = iou > best_iou
                    || (iou == best_iou && gts[gi].area() < gts[best_gi].area());
                if better {
                    claims.insert(point_idx, (iou, gi));
                }
            }
            None => {
                claims.insert(point_idx, (iou, gi));
            }
        }
    }

    let mut winners: Vec<(usize, usize)> = claims
        .into_iter()
        .map(|(point_idx, (_, gi))| (point_idx, gi))
        .collect();
    winners.sort_unstable_by_key(|&(point_idx, _)| point_idx);
    for (point_idx, gi) in winners {
        per_gt[gi].positives.push(points[point_idx]);
    }

    Ok(AssignmentResult { per_gt })
}

/// Area/positive-count pair for one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtSample {
    pub area: f64,
    pub positives: usize,
}

/// Area-balance statistics of an assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceStats {
    /// One sample per instance, in input order.
    pub samples: Vec<GtSample>,
    /// Pearson correlation of `log10(area)` against positive count; 0 when
    /// either side has zero variance. Zero-area instances are excluded from
    /// the correlation (their log-area is undefined) but kept in `samples`
    /// and the histogram.
    pub log_area_correlation: f64,
    /// Positive count -> number of instances with that count.
    pub histogram: BTreeMap<usize, usize>,
}

impl ImbalanceStats {
    pub fn from_samples(samples: Vec<GtSample>) -> Self {
        let mut histogram = BTreeMap::new();
        for s in &samples {
            *histogram.entry(s.positives).or_insert(0) += 1;
        }
        let xy: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| s.area > 0.0)
            .map(|s| (s.area.log10(), s.positives as f64))
            .collect();
        let log_area_correlation = pearson(&xy);
        Self { samples, log_area_correlation, histogram }
    }
}

/// Per-instance (area, positive count) pairs plus their log-area Pearson
/// correlation. `result` must have been produced from `gts`.
pub fn imbalance_stats(result: &AssignmentResult, gts: &[BBox]) -> ImbalanceStats {
    debug_assert_eq!(result.per_gt.len(), gts.len());
    let samples = gts
        .iter()
        .zip(&result.per_gt)
        .map(|(gt, a)| GtSample { area: gt.area(), positives: a.positives.len() })
        .collect();
    ImbalanceStats::from_samples(samples)
}

fn pearson(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    if xy.len() < 2 {
        return 0.0;
    }
    let mx = xy.iter().map(|&(x, _)| x).sum::<f64>() / n;
    let my = xy.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in xy {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    // rounding can push |r| a hair past 1
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}
