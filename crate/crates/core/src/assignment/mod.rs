//! Detection/ground-truth matching: pairwise costs, exact one-to-one assignment
//! and greedy-matching label assignment.

mod greedy;
mod hungarian;

pub use greedy::{greedy_match, GreedyMatchConfig, LabelAssignment, LabelRecord};
pub use hungarian::{hungarian, Assignment};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{giou, l1_distance, BoundingBox};
use crate::matrix::Matrix;

/// A scored candidate box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub score: f64,
    pub category: u32,
}

impl Detection {
    pub fn new(bbox: BoundingBox, score: f64, category: u32) -> Self {
        Self {
            bbox,
            score,
            category,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.bbox.is_valid() && (0.0..=1.0).contains(&self.score)
    }
}

/// An annotated reference box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub category: u32,
}

impl GroundTruth {
    pub fn new(bbox: BoundingBox, category: u32) -> Self {
        Self { bbox, category }
    }
}

/// Coefficients of the detection-to-ground-truth matching cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub w_category: f64,
    pub w_l1: f64,
    pub w_giou: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            w_category: 2.0,
            w_l1: 5.0,
            w_giou: 2.0,
        }
    }
}

impl CostWeights {
    pub fn new(w_category: f64, w_l1: f64, w_giou: f64) -> Self {
        Self {
            w_category,
            w_l1,
            w_giou,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.w_category, self.w_l1, self.w_giou];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(format!(
                "cost weights must be finite and non-negative, got {all:?}"
            )));
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err(Error::Config("cost weights are all zero".into()));
        }
        Ok(())
    }
}

/// Matching cost of a detection against a ground truth.
///
/// The category term is `1 - score` for a matching category and `1 + score`
/// otherwise; the box terms are the center-size L1 distance and `1 - giou`.
pub fn pair_cost(det: &Detection, gt: &GroundTruth, w: &CostWeights) -> f64 {
    let category_cost = if det.category == gt.category {
        1.0 - det.score
    } else {
        1.0 + det.score
    };
    w.w_category * category_cost
        + w.w_l1 * l1_distance(&det.bbox, &gt.bbox)
        + w.w_giou * (1.0 - giou(&det.bbox, &gt.bbox))
}

/// `#dets x #gts` matrix of [`pair_cost`].
pub fn cost_matrix(dets: &[Detection], gts: &[GroundTruth], w: &CostWeights) -> Matrix {
    Matrix::from_fn(dets.len(), gts.len(), |i, j| pair_cost(&dets[i], &gts[j], w))
}

/// One-to-one targets: each detection gets the ground truth the optimal
/// assignment gives it, or `None`.
pub fn one_to_one_targets(
    dets: &[Detection],
    gts: &[GroundTruth],
    w: &CostWeights,
) -> Result<Vec<Option<usize>>> {
    if gts.is_empty() || dets.is_empty() {
        return Ok(vec![None; dets.len()]);
    }
    let assignment = hungarian(&cost_matrix(dets, gts, w))?;
    Ok(assignment.col_for_rows(dets.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(cx: f64, cy: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(cx, cy, w, h)
    }

    #[test]
    fn pair_cost_examples() {
        let w = CostWeights::default();
        let gt = GroundTruth::new(b(0.5, 0.5, 0.2, 0.2), 1);
        let perfect = Detection::new(gt.bbox, 1.0, 1);
        assert!(pair_cost(&perfect, &gt, &w).abs() < 1e-15);
        let half = Detection::new(gt.bbox, 0.5, 1);
        assert!((pair_cost(&half, &gt, &w) - 1.0).abs() < 1e-12);
        let wrong = Detection::new(gt.bbox, 0.5, 2);
        assert!((pair_cost(&wrong, &gt, &CostWeights::new(1.0, 0.0, 0.0)) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn weight_validation() {
        assert!(CostWeights::default().validate().is_ok());
        assert!(CostWeights::new(0.0, 0.0, 0.0).validate().is_err());
        assert!(CostWeights::new(-1.0, 1.0, 0.0).validate().is_err());
    }

    #[test]
    fn one_to_one_single_pair() {
        let gt = GroundTruth::new(b(0.5, 0.5, 0.2, 0.2), 0);
        let det = Detection::new(gt.bbox, 0.9, 0);
        let t = one_to_one_targets(&[det], &[gt], &CostWeights::default()).unwrap();
        assert_eq!(t, vec![Some(0)]);
    }

    #[test]
    fn one_to_one_is_injective() {
        let gt = GroundTruth::new(b(0.5, 0.5, 0.2, 0.2), 0);
        let det = Detection::new(gt.bbox, 0.9, 0);
        let t = one_to_one_targets(&[det, det], &[gt], &CostWeights::default()).unwrap();
        assert_eq!(t.iter().filter(|x| x.is_some()).count(), 1);
        assert_eq!(t, vec![Some(0), None]);
    }

    #[test]
    fn one_to_one_without_ground_truth() {
        let det = Detection::new(b(0.5, 0.5, 0.2, 0.2), 0.9, 0);
        let t = one_to_one_targets(&[det, det], &[], &CostWeights::default()).unwrap();
        assert_eq!(t, vec![None, None]);
    }
}
