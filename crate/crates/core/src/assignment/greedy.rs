//! Greedy-matching label assignment.
//!
//! Every detection joins the cluster of its cheapest ground truth. Inside a
//! cluster only the best-ranked well-localized member is labelled "keep"; every
//! other member, and every member of a cluster without a well-localized
//! candidate, is labelled "filter out".

use serde::{Deserialize, Serialize};

use super::{pair_cost, CostWeights, Detection, GroundTruth};
use crate::error::{Error, Result};
use crate::geometry::iou;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreedyMatchConfig {
    /// Rank window: poorly localized detections ranked above `theta` are demoted.
    pub theta: usize,
    /// Minimum IoU with the assigned ground truth required for retention.
    pub iou_floor: f64,
    pub weights: CostWeights,
}

impl Default for GreedyMatchConfig {
    fn default() -> Self {
        Self {
            theta: 30,
            iou_floor: 0.6,
            weights: CostWeights::default(),
        }
    }
}

impl GreedyMatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.iou_floor) {
            return Err(Error::Config(format!(
                "greedy.iou_floor must lie in [0, 1], got {}",
                self.iou_floor
            )));
        }
        self.weights.validate()
    }
}

/// Label of one detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub assigned_gt: Option<usize>,
    #[serde(with = "keep_flag")]
    pub keep: bool,
    pub demoted: bool,
    pub rank: usize,
}

mod keep_flag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!(
                "keep must be 0 or 1, got {other}"
            ))),
        }
    }
}

/// Per-detection labels, in detection order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelAssignment {
    pub records: Vec<LabelRecord>,
}

impl LabelAssignment {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn keep_count(&self) -> usize {
        self.records.iter().filter(|r| r.keep).count()
    }

    pub fn kept_indices(&self) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.keep.then_some(i))
            .collect()
    }

    /// Keep labels as 0/1 targets.
    pub fn targets(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| if r.keep { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Greedy-matching label assignment.
///
/// `ranks[i]` is detection `i`'s confidence rank (0 = highest score).
pub fn greedy_match(
    dets: &[Detection],
    gts: &[GroundTruth],
    ranks: &[usize],
    cfg: &GreedyMatchConfig,
) -> Result<LabelAssignment> {
    if ranks.len() != dets.len() {
        return Err(Error::DimensionMismatch {
            context: "greedy_match ranks".into(),
            expected: format!("{} ranks", dets.len()),
            found: format!("{} ranks", ranks.len()),
        });
    }
    if gts.is_empty() {
        return Ok(LabelAssignment {
            records: ranks
                .iter()
                .map(|&rank| LabelRecord {
                    assigned_gt: None,
                    keep: false,
                    demoted: false,
                    rank,
                })
                .collect(),
        });
    }

    let mut records = Vec::with_capacity(dets.len());
    // Best eligible member per ground truth: (rank, index).
    let mut leader: Vec<Option<(usize, usize)>> = vec![None; gts.len()];
    for (i, det) in dets.iter().enumerate() {
        let mut best = 0usize;
        let mut best_cost = f64::INFINITY;
        for (j, gt) in gts.iter().enumerate() {
            let c = pair_cost(det, gt, &cfg.weights);
            if c < best_cost {
                best_cost = c;
                best = j;
            }
        }
        let overlap = iou(&det.bbox, &gts[best].bbox);
        let rank = ranks[i];
        let demoted = overlap < cfg.iou_floor && rank < cfg.theta;
        if !demoted && overlap >= cfg.iou_floor {
            let candidate = (rank, i);
            if leader[best].is_none_or(|cur| candidate < cur) {
                leader[best] = Some(candidate);
            }
        }
        records.push(LabelRecord {
            assigned_gt: Some(best),
            keep: false,
            demoted,
            rank,
        });
    }
    for (_, i) in leader.into_iter().flatten() {
        records[i].keep = true;
    }
    Ok(LabelAssignment { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use crate::ranking::rank_indices;

    fn det(cx: f64, cy: f64, w: f64, h: f64, score: f64) -> Detection {
        Detection::new(BoundingBox::new(cx, cy, w, h), score, 0)
    }

    fn run(dets: &[Detection], gts: &[GroundTruth], cfg: &GreedyMatchConfig) -> LabelAssignment {
        let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
        greedy_match(dets, gts, &rank_indices(&scores), cfg).unwrap()
    }

    #[test]
    fn keeps_best_scored_member_per_cluster() {
        let gts = [
            GroundTruth::new(BoundingBox::new(0.2, 0.5, 0.2, 0.2), 0),
            GroundTruth::new(BoundingBox::new(0.7, 0.5, 0.2, 0.2), 0),
        ];
        let dets = [
            det(0.2, 0.5, 0.2, 0.2, 0.6),
            det(0.205, 0.5, 0.2, 0.2, 0.8),
            det(0.7, 0.5, 0.2, 0.2, 0.9),
            det(0.7, 0.505, 0.2, 0.2, 0.5),
        ];
        let labels = run(&dets, &gts, &GreedyMatchConfig::default());
        assert_eq!(labels.kept_indices(), vec![1, 2]);
        let assigned: Vec<_> = labels.records.iter().map(|r| r.assigned_gt).collect();
        assert_eq!(assigned, vec![Some(0), Some(0), Some(1), Some(1)]);
    }

    #[test]
    fn poorly_localized_high_score_is_demoted() {
        // A: score 0.9, IoU 0.3; B: score 0.6, IoU 0.9 (same height, shifted/shrunk).
        let gt = GroundTruth::new(BoundingBox::new(0.5, 0.5, 0.2, 0.2), 0);
        let a = Detection::new(BoundingBox::new(0.5, 0.5, 0.2 * 0.3, 0.2), 0.9, 0);
        let b = Detection::new(BoundingBox::new(0.5, 0.5, 0.2 * 0.9, 0.2), 0.6, 0);
        assert!((iou(&a.bbox, &gt.bbox) - 0.3).abs() < 1e-12);
        assert!((iou(&b.bbox, &gt.bbox) - 0.9).abs() < 1e-12);

        let cfg = GreedyMatchConfig {
            theta: 1,
            iou_floor: 0.6,
            ..Default::default()
        };
        let labels = run(&[a, b], &[gt], &cfg);
        assert!(labels.records[0].demoted);
        assert!(!labels.records[0].keep);
        assert!(labels.records[1].keep);

        let lenient = GreedyMatchConfig {
            theta: 0,
            iou_floor: 0.0,
            ..Default::default()
        };
        let labels = run(&[a, b], &[gt], &lenient);
        assert_eq!(labels.kept_indices(), vec![0]);
        assert!(!labels.records[0].demoted);
    }

    #[test]
    fn identical_copies_keep_rank_zero() {
        let gt = GroundTruth::new(BoundingBox::new(0.4, 0.4, 0.1, 0.3), 0);
        for n in 1..12 {
            let dets = vec![Detection::new(gt.bbox, 0.7, 0); n];
            let labels = run(&dets, &[gt], &GreedyMatchConfig::default());
            assert_eq!(labels.kept_indices(), vec![0]);
            assert_eq!(labels.records[0].rank, 0);
        }
    }

    #[test]
    fn abandons_poorly_localized_cluster() {
        let gt = GroundTruth::new(BoundingBox::new(0.5, 0.5, 0.2, 0.2), 0);
        let dets = [det(0.6, 0.6, 0.2, 0.2, 0.9), det(0.62, 0.6, 0.2, 0.2, 0.8)];
        let labels = run(&dets, &[gt], &GreedyMatchConfig::default());
        assert_eq!(labels.keep_count(), 0);
        assert!(labels.records.iter().all(|r| r.assigned_gt == Some(0)));
        assert!(labels.records.iter().all(|r| r.demoted));
    }

    #[test]
    fn no_ground_truth() {
        let dets = [det(0.5, 0.5, 0.1, 0.1, 0.5)];
        let labels = run(&dets, &[], &GreedyMatchConfig::default());
        assert_eq!(labels.records[0].assigned_gt, None);
        assert!(!labels.records[0].keep);
    }

    #[test]
    fn rank_length_mismatch() {
        let dets = [det(0.5, 0.5, 0.1, 0.1, 0.5)];
        assert!(greedy_match(&dets, &[], &[], &GreedyMatchConfig::default()).is_err());
    }

    #[test]
    fn record_json_shape() {
        let r = LabelRecord {
            assigned_gt: Some(2),
            keep: true,
            demoted: false,
            rank: 4,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"assigned_gt":2,"keep":1,"demoted":false,"rank":4}"#
        );
    }
}
