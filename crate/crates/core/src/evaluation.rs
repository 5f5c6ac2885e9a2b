//! Detection metrics: TP/FP matching, 101-point interpolated AP, COCO-style
//! mean AP, and the ideal-recall oracle.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::assignment::{hungarian, Detection, GroundTruth};
use crate::geometry::iou;
use crate::matrix::Matrix;
use crate::ranking::score_order;

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// Maximum detections per scene counted by [`coco_map`] and recall.
pub const MAX_DETS_PER_SCENE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrMetrics {
    pub scene_count: usize,
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
    /// Fraction of ground truths matched at IoU 0.5 within the detection budget.
    pub recall: f64,
    /// Mean over scenes of [`ideal_recall`] at IoU 0.5.
    pub ideal_recall: f64,
    /// Per-threshold AP for [`coco_thresholds`].
    #[serde(skip)]
    pub ap_per_threshold: [f64; 10],
}

/// Flags each detection as a true positive. `dets` must already be sorted by
/// descending score. A detection is a TP iff the unclaimed same-category ground
/// truth it overlaps most has IoU >= `iou_thr`; that ground truth is then claimed.
pub fn match_tp_fp(dets: &[Detection], gts: &[GroundTruth], iou_thr: f64) -> Vec<bool> {
    let mut claimed = vec![false; gts.len()];
    dets.iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for (j, g) in gts.iter().enumerate() {
                if claimed[j] || g.category != d.category {
                    continue;
                }
                let o = iou(&d.bbox, &g.bbox);
                if best.is_none_or(|(_, b)| o > b) {
                    best = Some((j, o));
                }
            }
            match best {
                Some((j, o)) if o >= iou_thr => {
                    claimed[j] = true;
                    true
                }
                _ => false,
            }
        })
        .collect()
}

/// 101-point interpolated average precision of a ranked TP/FP sequence.
pub fn average_precision(flags: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return if flags.is_empty() { 1.0 } else { 0.0 };
    }
    let mut tp = 0usize;
    let mut recall = Vec::with_capacity(flags.len());
    let mut precision = Vec::with_capacity(flags.len());
    for (i, &f) in flags.iter().enumerate() {
        if f {
            tp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    // precision envelope from the right
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut sum = 0.0;
    let mut idx = 0usize;
    for step in 0..=100 {
        let r = step as f64 / 100.0;
        while idx < recall.len() && recall[idx] < r {
            idx += 1;
        }
        if idx < recall.len() {
            sum += precision[idx];
        }
    }
    sum / 101.0
}

/// One scene's ground truths and detections as evaluation input.
#[derive(Debug, Clone, Copy)]
pub struct EvalScene<'a> {
    pub gts: &'a [GroundTruth],
    pub dets: &'a [Detection],
}

fn budgeted(dets: &[Detection]) -> Vec<Detection> {
    let order = score_order(&dets.iter().map(|d| d.score).collect::<Vec<_>>());
    order
        .into_iter()
        .take(MAX_DETS_PER_SCENE)
        .map(|i| dets[i])
        .collect()
}

/// AP of every threshold averaged over the categories with ground truth.
fn per_threshold_ap(scenes: &[EvalScene<'_>], thresholds: &[f64]) -> Vec<f64> {
    let categories: BTreeSet<u32> = scenes
        .iter()
        .flat_map(|s| s.gts.iter().map(|g| g.category))
        .collect();
    let sorted: Vec<Vec<Detection>> = scenes.iter().map(|s| budgeted(s.dets)).collect();
    if categories.is_empty() {
        let any = sorted.iter().any(|d| !d.is_empty());
        return vec![if any { 0.0 } else { 1.0 }; thresholds.len()];
    }
    thresholds
        .iter()
        .map(|&thr| {
            let mut total = 0.0;
            for &c in &categories {
                // (score, scene, position) -> flag
                let mut ranked: Vec<(f64, usize, usize, bool)> = Vec::new();
                let mut n_gt = 0;
                for (si, (scene, dets)) in scenes.iter().zip(&sorted).enumerate() {
                    let gts: Vec<GroundTruth> =
                        scene.gts.iter().copied().filter(|g| g.category == c).collect();
                    n_gt += gts.len();
                    let cat_dets: Vec<Detection> =
                        dets.iter().copied().filter(|d| d.category == c).collect();
                    let flags = match_tp_fp(&cat_dets, &gts, thr);
                    ranked.extend(
                        cat_dets
                            .iter()
                            .zip(flags)
                            .enumerate()
                            .map(|(pos, (d, f))| (d.score, si, pos, f)),
                    );
                }
                ranked.sort_by(|a, b| {
                    b.0.total_cmp(&a.0)
                        .then(a.1.cmp(&b.1))
                        .then(a.2.cmp(&b.2))
                });
                let flags: Vec<bool> = ranked.iter().map(|r| r.3).collect();
                total += average_precision(&flags, n_gt);
            }
            total / categories.len() as f64
        })
        .collect()
}

/// COCO-style AP averaged over IoU 0.50:0.05:0.95 and the categories that have
/// ground truth.
pub fn coco_map(scenes: &[EvalScene<'_>]) -> f64 {
    let aps = per_threshold_ap(scenes, &coco_thresholds());
    aps.iter().sum::<f64>() / aps.len() as f64
}

/// Size of a maximum one-to-one matching between `kept` and same-category
/// ground truths with IoU >= `iou_thr`, as a fraction of the ground truths.
pub fn ideal_recall(kept: &[Detection], gts: &[GroundTruth], iou_thr: f64) -> f64 {
    if gts.is_empty() {
        return 1.0;
    }
    if kept.is_empty() {
        return 0.0;
    }
    let eligible = |d: &Detection, g: &GroundTruth| {
        if d.category != g.category {
            return None;
        }
        let o = iou(&d.bbox, &g.bbox);
        (o >= iou_thr).then_some(o)
    };
    // Any eligible pair costs at most 1; a forbidden pair costs more than every
    // eligible pair combined, so the optimum maximizes the eligible count.
    let forbidden = (kept.len().min(gts.len()) + 1) as f64;
    let cost = Matrix::from_fn(kept.len(), gts.len(), |i, j| {
        eligible(&kept[i], &gts[j]).map_or(forbidden, |o| 1.0 - o)
    });
    let assignment = hungarian(&cost).expect("finite costs");
    let matched = assignment
        .pairs
        .iter()
        .filter(|&&(i, j)| eligible(&kept[i], &gts[j]).is_some())
        .count();
    matched as f64 / gts.len() as f64
}

/// Fraction of ground truths claimed at IoU 0.5 by the budgeted detections.
fn recall_at_budget(scenes: &[EvalScene<'_>]) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for s in scenes {
        let dets = budgeted(s.dets);
        hit += match_tp_fp(&dets, s.gts, 0.5).iter().filter(|&&f| f).count();
        total += s.gts.len();
    }
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}

/// All metrics of a detection set.
pub fn evaluate(scenes: &[EvalScene<'_>]) -> PrMetrics {
    if scenes.is_empty() {
        return PrMetrics::default();
    }
    let aps = per_threshold_ap(scenes, &coco_thresholds());
    let ideal = scenes
        .iter()
        .map(|s| ideal_recall(s.dets, s.gts, 0.5))
        .sum::<f64>()
        / scenes.len() as f64;
    PrMetrics {
        scene_count: scenes.len(),
        ap: aps.iter().sum::<f64>() / aps.len() as f64,
        ap50: aps[0],
        ap75: aps[5],
        recall: recall_at_budget(scenes),
        ideal_recall: ideal,
        ap_per_threshold: aps.try_into().expect("ten thresholds"),
    }
}
