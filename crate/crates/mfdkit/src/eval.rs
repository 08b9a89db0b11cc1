//! Precision / recall / F1 evaluation per class and micro-averaged total.
//!
//! Matching is greedy and score-ordered: predictions are visited in
//! descending score (ties by input order) and each takes the unmatched
//! same-class ground truth with the highest IoU, provided that IoU reaches
//! the threshold. Greedy matching can fall short of the optimal assignment
//! on adversarial overlaps; it is used here because it is the standard,
//! deterministic convention.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::detection::{Detection, GroundTruth, PredictionRecord};
use crate::geometry::FormulaClass;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("prediction references page `{0}` absent from the ground truth")]
    UnknownPage(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl MatchCounts {
    /// `tp / (tp + fp)`, defined as 1 when there are no predictions.
    pub fn precision(&self) -> f64 {
        let denom = self.true_positives + self.false_positives;
        if denom == 0 {
            1.0
        } else {
            self.true_positives as f64 / denom as f64
        }
    }

    /// `tp / (tp + fn)`, defined as 1 when there are no ground truths.
    pub fn recall(&self) -> f64 {
        let denom = self.true_positives + self.false_negatives;
        if denom == 0 {
            1.0
        } else {
            self.true_positives as f64 / denom as f64
        }
    }

    /// `2pr / (p + r)`, defined as 0 when `p + r` is 0.
    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn add(&mut self, other: MatchCounts) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PageCounts {
    pub embedded: MatchCounts,
    pub isolated: MatchCounts,
}

impl PageCounts {
    pub fn class(&self, class: FormulaClass) -> MatchCounts {
        match class {
            FormulaClass::Embedded => self.embedded,
            FormulaClass::Isolated => self.isolated,
        }
    }

    /// Micro-averaged counts: the per-class sums.
    pub fn total(&self) -> MatchCounts {
        let mut t = self.embedded;
        t.add(self.isolated);
        t
    }

    pub fn add(&mut self, other: &PageCounts) {
        self.embedded.add(other.embedded);
        self.isolated.add(other.isolated);
    }
}

/// Matched `(prediction index, ground-truth index)` pairs for one page,
/// with indices into the input slices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PageMatches {
    pub embedded: Vec<(usize, usize)>,
    pub isolated: Vec<(usize, usize)>,
}

impl PageMatches {
    pub fn class(&self, class: FormulaClass) -> &[(usize, usize)] {
        match class {
            FormulaClass::Embedded => &self.embedded,
            FormulaClass::Isolated => &self.isolated,
        }
    }
}

/// Greedy matching on one page, returning the matched pairs.
pub fn match_page_detail(
    preds: &[Detection],
    gts: &[GroundTruth],
    iou_thresh: f64,
) -> PageMatches {
    let mut matches = PageMatches::default();
    let mut gt_taken = vec![false; gts.len()];
    for class in FormulaClass::ALL {
        let mut pred_order: Vec<usize> = (0..preds.len())
            .filter(|&i| preds[i].class() == class)
            .collect();
        pred_order.sort_by(|&a, &b| {
            preds[b]
                .score()
                .partial_cmp(&preds[a].score())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });

        let out = match class {
            FormulaClass::Embedded => &mut matches.embedded,
            FormulaClass::Isolated => &mut matches.isolated,
        };
        for pi in pred_order {
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if gt.class != class || gt_taken[gi] {
                    continue;
                }
                let iou = preds[pi].bbox().iou(&gt.bbox);
                if iou >= iou_thresh {
                    // ties on IoU go to the earlier ground truth
                    let better = best.map_or(true, |(_, b)| iou > b);
                    if better {
                        best = Some((gi, iou));
                    }
                }
            }
            if let Some((gi, _)) = best {
                gt_taken[gi] = true;
                out.push((pi, gi));
            }
        }
    }
    matches
}

/// Per-class TP / FP / FN for the predictions and ground truths of one page.
pub fn match_page(preds: &[Detection], gts: &[GroundTruth], iou_thresh: f64) -> PageCounts {
    let matches = match_page_detail(preds, gts, iou_thresh);
    let mut counts = PageCounts::default();
    for class in FormulaClass::ALL {
        let tp = matches.class(class).len();
        let n_pred = preds.iter().filter(|p| p.class() == class).count();
        let n_gt = gts.iter().filter(|g| g.class == class).count();
        let c = MatchCounts {
            true_positives: tp,
            false_positives: n_pred - tp,
            false_negatives: n_gt - tp,
        };
        match class {
            FormulaClass::Embedded => counts.embedded = c,
            FormulaClass::Isolated => counts.isolated = c,
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: MatchCounts,
}

impl From<MatchCounts> for ClassReport {
    fn from(counts: MatchCounts) -> Self {
        Self {
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageBreakdown {
    pub page_id: String,
    pub counts: PageCounts,
}

/// Per-class and micro-averaged totals, plus a per-page breakdown sorted by
/// page id.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub embedded: ClassReport,
    pub isolated: ClassReport,
    pub total: ClassReport,
    pub pages: Vec<PageBreakdown>,
}

impl EvalReport {
    pub fn class(&self, class: FormulaClass) -> &ClassReport {
        match class {
            FormulaClass::Embedded => &self.embedded,
            FormulaClass::Isolated => &self.isolated,
        }
    }
}

/// Evaluates predictions against ground truth over all pages. The ground
/// truth defines the page universe: predictions on unknown pages are an
/// error, and ground-truth pages without predictions contribute false
/// negatives only.
pub fn evaluate(
    preds: &[PredictionRecord],
    gts: &[GroundTruth],
    iou_thresh: f64,
) -> Result<EvalReport, EvalError> {
    let mut pages: BTreeMap<&str, (Vec<Detection>, Vec<GroundTruth>)> = BTreeMap::new();
    for gt in gts {
        pages.entry(&gt.page_id).or_default().1.push(gt.clone());
    }
    for pred in preds {
        match pages.get_mut(pred.page_id.as_str()) {
            Some(page) => page.0.push(pred.detection.clone()),
            None => return Err(EvalError::UnknownPage(pred.page_id.clone())),
        }
    }

    let mut aggregate = PageCounts::default();
    let mut breakdown = Vec::with_capacity(pages.len());
    for (page_id, (page_preds, page_gts)) in &pages {
        let counts = match_page(page_preds, page_gts, iou_thresh);
        aggregate.add(&counts);
        breakdown.push(PageBreakdown { page_id: (*page_id).to_string(), counts });
    }

    Ok(EvalReport {
        embedded: aggregate.embedded.into(),
        isolated: aggregate.isolated.into(),
        total: aggregate.total().into(),
        pages: breakdown,
    })
}
