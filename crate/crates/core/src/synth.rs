//! Seeded generator of crowded, duplicate-heavy detection scenes.
//!
//! Ground truths are laid out as horizontal chains in which every box overlaps
//! its right-hand neighbour at a controlled IoU. Each ground truth emits a
//! cluster of jittered duplicate detections whose scores can be coupled to (or
//! decoupled from) their localization quality, plus optional low-score
//! background false positives.
//!
//! All randomness for scene `i` comes from a ChaCha8 stream keyed by
//! `(seed, i)`, so a scene does not depend on which other scenes are generated
//! or in which order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{Detection, GroundTruth};
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};

const MAX_PLACEMENT_ATTEMPTS: usize = 16;
/// Neighbouring ground-truth IoU is drawn within this distance of the target.
pub const OVERLAP_SPREAD: f64 = 0.03;
pub const SCORE_RANGE: (f64, f64) = (0.05, 0.99);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_gts: usize,
    pub categories: u32,
    /// Target IoU between chained ground-truth neighbours.
    pub gt_overlap: f64,
    pub dups_per_gt: usize,
    /// Standard deviation of the noise added to each box coordinate.
    pub jitter_sigma: f64,
    /// Coupling of a duplicate's score to its IoU with the ground truth, in [-1, 1].
    pub score_iou_corr: f64,
    /// Spread of duplicate scores around their cluster's base score.
    pub score_sigma: f64,
    /// Mean number of background false positives per scene.
    pub fp_rate: f64,
    pub seed: u64,
    pub image_size: [u32; 2],
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_gts: 8,
            categories: 3,
            gt_overlap: 0.3,
            dups_per_gt: 5,
            jitter_sigma: 0.01,
            score_iou_corr: 0.5,
            score_sigma: 0.05,
            fp_rate: 2.0,
            seed: 0,
            image_size: [640, 640],
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.gt_overlap) {
            return bad(format!("synth.gt_overlap must lie in [0, 1), got {}", self.gt_overlap));
        }
        if self.jitter_sigma < 0.0 || !self.jitter_sigma.is_finite() {
            return bad(format!("synth.jitter_sigma must be >= 0, got {}", self.jitter_sigma));
        }
        if self.score_sigma < 0.0 || !self.score_sigma.is_finite() {
            return bad(format!("synth.score_sigma must be >= 0, got {}", self.score_sigma));
        }
        if !(-1.0..=1.0).contains(&self.score_iou_corr) {
            return bad(format!(
                "synth.score_iou_corr must lie in [-1, 1], got {}",
                self.score_iou_corr
            ));
        }
        if self.fp_rate < 0.0 || !self.fp_rate.is_finite() {
            return bad(format!("synth.fp_rate must be >= 0, got {}", self.fp_rate));
        }
        if self.categories == 0 {
            return bad("synth.categories must be at least 1".into());
        }
        Ok(())
    }
}

/// One image: its ground truths and candidate detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    pub image_size: [u32; 2],
    pub ground_truths: Vec<GroundTruth>,
    pub detections: Vec<Detection>,
}

impl Scene {
    /// Same scene with its detections replaced.
    pub fn with_detections(&self, detections: Vec<Detection>) -> Scene {
        Scene {
            scene_id: self.scene_id.clone(),
            image_size: self.image_size,
            ground_truths: self.ground_truths.clone(),
            detections,
        }
    }
}

fn scene_rng(seed: u64, scene_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(scene_index);
    rng
}

/// Lays out `n` equally sized boxes in left-to-right chains. Returns `None` if
/// they do not fit in the unit square.
fn place_chain(
    n: usize,
    w: f64,
    h: f64,
    overlap: f64,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<BoundingBox>> {
    const MARGIN: f64 = 0.02;
    let mut boxes = Vec::with_capacity(n);
    let mut x = MARGIN + rng.random_range(0.0..0.05);
    let mut y = MARGIN;
    for i in 0..n {
        if i > 0 {
            let lo = (overlap - OVERLAP_SPREAD).max(0.0);
            let hi = (overlap + OVERLAP_SPREAD).min(0.99);
            let t = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            // equal boxes shifted by dx overlap at (w - dx) / (w + dx)
            let dx = w * (1.0 - t) / (1.0 + t);
            x += dx;
            if x + w > 1.0 - MARGIN {
                x = MARGIN + rng.random_range(0.0..0.05);
                y += h + MARGIN + rng.random_range(0.0..0.03);
            }
        }
        if y + h > 1.0 - MARGIN {
            return None;
        }
        boxes.push(BoundingBox::new(x + 0.5 * w, y + 0.5 * h, w, h));
    }
    Some(boxes)
}

fn jitter(b: &BoundingBox, sigma: f64, rng: &mut ChaCha8Rng) -> BoundingBox {
    if sigma == 0.0 {
        return *b;
    }
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    let cx = b.cx + noise.sample(rng);
    let cy = b.cy + noise.sample(rng);
    let w = (b.w + noise.sample(rng)).max(0.0);
    let h = (b.h + noise.sample(rng)).max(0.0);
    BoundingBox::new(cx, cy, w, h).clip_unit()
}

/// Deterministically generates scene `scene_index`.
pub fn gen_scene(cfg: &SynthConfig, scene_index: u64) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = scene_rng(cfg.seed, scene_index);

    let mut placed = None;
    for attempt in 0..MAX_PLACEMENT_ATTEMPTS {
        let shrink = 0.85f64.powi(attempt as i32);
        let w = rng.random_range(0.06..0.14) * shrink;
        let h = rng.random_range(0.10..0.22) * shrink;
        if let Some(boxes) = place_chain(cfg.n_gts, w, h, cfg.gt_overlap, &mut rng) {
            placed = Some(boxes);
            break;
        }
    }
    let boxes = placed.ok_or(Error::InfeasiblePlacement {
        scene_index,
        attempts: MAX_PLACEMENT_ATTEMPTS,
    })?;

    let ground_truths: Vec<GroundTruth> = boxes
        .into_iter()
        .map(|b| GroundTruth::new(b, rng.random_range(0..cfg.categories)))
        .collect();

    let (lo, hi) = SCORE_RANGE;
    let coupling = cfg.score_iou_corr;
    let independent = (1.0 - coupling * coupling).max(0.0).sqrt();
    let mut detections = Vec::with_capacity(ground_truths.len() * cfg.dups_per_gt);
    for gt in &ground_truths {
        let base: f64 = rng.random_range(0.35..0.9);
        let boxes: Vec<BoundingBox> = (0..cfg.dups_per_gt)
            .map(|_| jitter(&gt.bbox, cfg.jitter_sigma, &mut rng))
            .collect();
        let quality: Vec<f64> = boxes.iter().map(|b| iou(b, &gt.bbox)).collect();
        let standardized = standardize(&quality);
        for (b, u) in boxes.into_iter().zip(standardized) {
            let eps: f64 = StandardNormal.sample(&mut rng);
            let z = coupling * u + independent * eps;
            let score = (base + cfg.score_sigma * z).clamp(lo, hi);
            detections.push(Detection::new(b, score, gt.category));
        }
    }

    if cfg.fp_rate > 0.0 {
        let count = Poisson::new(cfg.fp_rate).expect("positive rate").sample(&mut rng) as usize;
        for _ in 0..count {
            let b = BoundingBox::new(
                rng.random_range(0.05..0.95),
                rng.random_range(0.05..0.95),
                rng.random_range(0.03..0.15),
                rng.random_range(0.05..0.2),
            )
            .clip_unit();
            let score = rng.random_range(lo..0.3);
            detections.push(Detection::new(b, score, rng.random_range(0..cfg.categories)));
        }
    }

    Ok(Scene {
        scene_id: format!("scene-{scene_index:06}"),
        image_size: cfg.image_size,
        ground_truths,
        detections,
    })
}

/// Centers and scales to unit variance; constant input maps to zeros.
fn standardize(v: &[f64]) -> Vec<f64> {
    if v.len() < 2 {
        return vec![0.0; v.len()];
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
    if var <= 1e-24 {
        return vec![0.0; v.len()];
    }
    let sd = var.sqrt();
    v.iter().map(|x| (x - mean) / sd).collect()
}

/// Scenes `0..n_scenes`, generated in parallel and returned in index order.
pub fn gen_dataset(cfg: &SynthConfig, n_scenes: usize) -> Result<Vec<Scene>> {
    if n_scenes == 0 {
        return Err(Error::Config("n_scenes must be at least 1".into()));
    }
    (0..n_scenes as u64)
        .into_par_iter()
        .map(|i| gen_scene(cfg, i))
        .collect()
}
