//! Dense-to-sparse query selection: hard NMS, top-k and confidence thresholds.

use serde::{Deserialize, Serialize};

use crate::assignment::Detection;
use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::ranking::score_order;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorMode {
    Topk,
    Nms,
}

impl std::str::FromStr for SelectorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "topk" => Ok(SelectorMode::Topk),
            "nms" => Ok(SelectorMode::Nms),
            other => Err(Error::Config(format!(
                "selector mode must be `topk` or `nms`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorConfig {
    pub mode: SelectorMode,
    pub k: usize,
    pub nms_iou: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            mode: SelectorMode::Topk,
            k: 100,
            nms_iou: 0.7,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("selector.k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(Error::Config(format!(
                "selector.nms_iou must lie in [0, 1], got {}",
                self.nms_iou
            )));
        }
        Ok(())
    }
}

fn scores(dets: &[Detection]) -> Vec<f64> {
    dets.iter().map(|d| d.score).collect()
}

/// Category-scoped hard NMS. A detection survives iff its IoU with every kept
/// detection of the same category is at most `iou_threshold`. Returns kept
/// indices in descending score order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for i in score_order(&scores(dets)) {
        let d = &dets[i];
        let suppressed = kept.iter().any(|&k| {
            dets[k].category == d.category && iou(&dets[k].bbox, &d.bbox) > iou_threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept
}

/// The `min(k, n)` best-scored detections, score-descending.
pub fn topk_select(dets: &[Detection], k: usize) -> Vec<usize> {
    let mut order = score_order(&scores(dets));
    order.truncate(k);
    order
}

/// Indices with `score > threshold`, in input order.
pub fn confidence_filter(dets: &[Detection], threshold: f64) -> Vec<usize> {
    dets.iter()
        .enumerate()
        .filter_map(|(i, d)| (d.score > threshold).then_some(i))
        .collect()
}

/// Sparse query pool chosen by the configured selector.
pub fn query_select(dets: &[Detection], cfg: &SelectorConfig) -> Vec<usize> {
    match cfg.mode {
        SelectorMode::Topk => topk_select(dets, cfg.k),
        SelectorMode::Nms => {
            let mut kept = nms(dets, cfg.nms_iou);
            kept.truncate(cfg.k);
            kept
        }
    }
}

/// Copies the detections at `indices`.
pub fn gather(dets: &[Detection], indices: &[usize]) -> Vec<Detection> {
    indices.iter().map(|&i| dets[i]).collect()
}
