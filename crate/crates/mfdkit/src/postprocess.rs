//! Inference-time box filtering and merging: greedy NMS, horizontal-flip
//! test-time merging, and weighted box fusion for model ensembles.
//!
//! All operations treat the two classes independently: an embedded box never
//! suppresses or fuses with an isolated one.

use std::cmp::Ordering;

use thiserror::Error;

use crate::detection::{Detection, FusedDetection};
use crate::geometry::{BBox, FormulaClass, GeometryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("weighted box fusion needs at least one detection set")]
    NoModels,
    #[error("got {actual} model weights for {expected} detection sets")]
    WeightCountMismatch { expected: usize, actual: usize },
    #[error("model weight {value} at index {index} must be positive and finite")]
    InvalidWeight { index: usize, value: f64 },
}

/// Greedy non-maximum suppression. Repeatedly keeps the highest-scored
/// remaining detection (ties to the smaller input index) and suppresses
/// same-class detections whose IoU with it exceeds `iou_thresh`. The output
/// is in descending score order.
pub fn nms(dets: &[Detection], iou_thresh: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| score_order(dets[a].score(), dets[b].score()).then(a.cmp(&b)));

    let mut suppressed = vec![false; dets.len()];
    let mut kept = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        kept.push(dets[i].clone());
        for &j in &order[pos + 1..] {
            if suppressed[j] || dets[j].class() != dets[i].class() {
                continue;
            }
            if dets[i].bbox().iou(dets[j].bbox()) > iou_thresh {
                suppressed[j] = true;
            }
        }
    }
    kept
}

/// Merges a straight pass with a horizontally flipped pass: flipped boxes
/// are mapped back across the image centerline, pooled after the straight
/// detections, and the pool is deduplicated with [`nms`].
pub fn merge_flip(
    dets: &[Detection],
    dets_flipped: &[Detection],
    image_width: f64,
    iou_thresh: f64,
) -> Result<Vec<Detection>, GeometryError> {
    let mut pool = dets.to_vec();
    for d in dets_flipped {
        pool.push(d.with_bbox(d.bbox().hflip(image_width)?));
    }
    Ok(nms(&pool, iou_thresh))
}

/// Keeps detections with `score >= min_score`, preserving order.
pub fn score_filter(dets: &[Detection], min_score: f64) -> Vec<Detection> {
    dets.iter().filter(|d| d.score() >= min_score).cloned().collect()
}

/// A fused detection together with the source detections that formed it.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedCluster {
    pub fused: FusedDetection,
    /// Members as given in the input (unweighted scores), in fusion order.
    pub members: Vec<Detection>,
}

/// Weighted box fusion across `det_sets`, one set per model.
///
/// Detections are pooled with scores scaled by their model weight
/// (default 1) and processed in descending weighted-score order. Each joins
/// the first same-class cluster whose current fused box overlaps it with
/// IoU above `iou_thresh`, otherwise it seeds a new cluster. A cluster's
/// box is the weighted-score average of its members' boxes, and its score
/// is the mean member weighted score rescaled by `min(n, M) / M` — boxes
/// confirmed by fewer than all `M` models are discounted.
pub fn wbf(
    det_sets: &[Vec<Detection>],
    iou_thresh: f64,
    model_weights: Option<&[f64]>,
) -> Result<Vec<FusedDetection>, FusionError> {
    Ok(wbf_clusters(det_sets, iou_thresh, model_weights)?
        .into_iter()
        .map(|c| c.fused)
        .collect())
}

/// [`wbf`] variant that also reports cluster membership.
pub fn wbf_clusters(
    det_sets: &[Vec<Detection>],
    iou_thresh: f64,
    model_weights: Option<&[f64]>,
) -> Result<Vec<FusedCluster>, FusionError> {
    let model_count = det_sets.len();
    if model_count == 0 {
        return Err(FusionError::NoModels);
    }
    if let Some(weights) = model_weights {
        if weights.len() != model_count {
            return Err(FusionError::WeightCountMismatch {
                expected: model_count,
                actual: weights.len(),
            });
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(FusionError::InvalidWeight { index, value });
            }
        }
    }
    let weight = |set_idx: usize| model_weights.map_or(1.0, |w| w[set_idx]);

    struct Pooled<'a> {
        det: &'a Detection,
        weighted_score: f64,
    }

    let mut pool: Vec<Pooled> = Vec::new();
    for (set_idx, set) in det_sets.iter().enumerate() {
        for det in set {
            pool.push(Pooled { det, weighted_score: det.score() * weight(set_idx) });
        }
    }
    // Descending weighted score; ties keep pool order (model, then input).
    pool.sort_by(|a, b| score_order(a.weighted_score, b.weighted_score));

    struct Cluster<'a> {
        class: FormulaClass,
        fused_box: BBox,
        coord_sums: [f64; 4],
        score_sum: f64,
        members: Vec<(&'a Detection, f64)>,
    }

    let mut clusters: Vec<Cluster> = Vec::new();
    for p in &pool {
        let bbox = p.det.bbox();
        let target = clusters.iter_mut().find(|c| {
            c.class == p.det.class() && c.fused_box.iou(bbox) > iou_thresh
        });
        match target {
            Some(c) => {
                c.coord_sums[0] += p.weighted_score * bbox.x1();
                c.coord_sums[1] += p.weighted_score * bbox.y1();
                c.coord_sums[2] += p.weighted_score * bbox.x2();
                c.coord_sums[3] += p.weighted_score * bbox.y2();
                c.score_sum += p.weighted_score;
                c.members.push((p.det, p.weighted_score));
                c.fused_box = fused_box(&c.coord_sums, c.score_sum, &c.members);
            }
            None => {
                let coord_sums = [
                    p.weighted_score * bbox.x1(),
                    p.weighted_score * bbox.y1(),
                    p.weighted_score * bbox.x2(),
                    p.weighted_score * bbox.y2(),
                ];
                clusters.push(Cluster {
                    class: p.det.class(),
                    fused_box: *bbox,
                    coord_sums,
                    score_sum: p.weighted_score,
                    members: vec![(p.det, p.weighted_score)],
                });
            }
        }
    }

    let mut out: Vec<FusedCluster> = clusters
        .into_iter()
        .map(|c| {
            let n = c.members.len();
            let mean_score =
                c.members.iter().map(|&(_, ws)| ws).sum::<f64>() / n as f64;
            let rescale = n.min(model_count) as f64 / model_count as f64;
            let score = (mean_score * rescale).clamp(0.0, 1.0);
            let detection = Detection::new(c.fused_box, c.class, score, 0)
                .expect("fused score clamped into [0, 1]");
            FusedCluster {
                fused: FusedDetection { detection, cluster_size: n },
                members: c.members.into_iter().map(|(d, _)| d.clone()).collect(),
            }
        })
        .collect();
    out.sort_by(|a, b| score_order(a.fused.detection.score(), b.fused.detection.score()));
    Ok(out)
}

/// Weighted coordinate average; with an all-zero score sum the members are
/// averaged uniformly instead.
fn fused_box(coord_sums: &[f64; 4], score_sum: f64, members: &[(&Detection, f64)]) -> BBox {
    if score_sum > 0.0 {
        BBox::new(
            coord_sums[0] / score_sum,
            coord_sums[1] / score_sum,
            coord_sums[2] / score_sum,
            coord_sums[3] / score_sum,
        )
        .expect("average of valid boxes is valid")
    } else {
        let n = members.len() as f64;
        let mut sums = [0.0; 4];
        for (d, _) in members {
            sums[0] += d.bbox().x1();
            sums[1] += d.bbox().y1();
            sums[2] += d.bbox().x2();
            sums[3] += d.bbox().y2();
        }
        BBox::new(sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n)
            .expect("average of valid boxes is valid")
    }
}

/// Descending order on scores. Scores are validated at construction and
/// model weights are finite, so the comparison is total in practice.
fn score_order(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}
