//! One-axis ablation sweeps comparing NMS, greedy-matching and top-k sets.

use rayon::prelude::*;

use super::config::PipelineConfig;
use super::io::{csv_table, fmt_sig6};
use super::pipeline::{label_detections, metrics_of};
use crate::error::{Error, Result};
use crate::evaluation::PrMetrics;
use crate::selection::{gather, nms, topk_select};
use crate::synth::{gen_dataset, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    NmsIou,
    Theta,
    DupsPerGt,
    GtOverlap,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::NmsIou => "nms_iou",
            SweepAxis::Theta => "theta",
            SweepAxis::DupsPerGt => "dups_per_gt",
            SweepAxis::GtOverlap => "gt_overlap",
        }
    }

    /// Applies `value` to a copy of `base`.
    pub fn apply(&self, base: &PipelineConfig, value: f64) -> Result<PipelineConfig> {
        let mut cfg = base.clone();
        let as_count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!(
                    "{} values must be non-negative integers, got {v}",
                    self.name()
                )))
            }
        };
        match self {
            SweepAxis::NmsIou => cfg.selector.nms_iou = value,
            SweepAxis::Theta => cfg.greedy.theta = as_count(value)?,
            SweepAxis::DupsPerGt => cfg.synth.dups_per_gt = as_count(value)?,
            SweepAxis::GtOverlap => cfg.synth.gt_overlap = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nms_iou" => Ok(SweepAxis::NmsIou),
            "theta" => Ok(SweepAxis::Theta),
            "dups_per_gt" => Ok(SweepAxis::DupsPerGt),
            "gt_overlap" => Ok(SweepAxis::GtOverlap),
            other => Err(Error::UnknownAxis(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// NMS at `selector.nms_iou`, truncated to `selector.k`.
    pub nms: PrMetrics,
    /// Greedy-matching keep set over all detections.
    pub greedy: PrMetrics,
    /// Top `selector.k` detections, no suppression.
    pub topk: PrMetrics,
}

/// The three candidate sets of one scene: NMS survivors, greedy keeps, raw top-k.
pub fn comparison_sets(scene: &Scene, cfg: &PipelineConfig) -> Result<[Scene; 3]> {
    let dets = &scene.detections;
    let mut nms_kept = nms(dets, cfg.selector.nms_iou);
    nms_kept.truncate(cfg.selector.k);
    let labels = label_detections(dets, scene, cfg)?;
    Ok([
        scene.with_detections(gather(dets, &nms_kept)),
        scene.with_detections(gather(dets, &labels.kept_indices())),
        scene.with_detections(gather(dets, &topk_select(dets, cfg.selector.k))),
    ])
}

/// Evaluates the comparison sets on `scenes` under `cfg`.
pub fn compare_sets(scenes: &[Scene], cfg: &PipelineConfig) -> Result<[PrMetrics; 3]> {
    let sets: Vec<[Scene; 3]> = scenes
        .par_iter()
        .map(|s| comparison_sets(s, cfg))
        .collect::<Result<_>>()?;
    let column = |k: usize| -> Vec<Scene> { sets.iter().map(|s| s[k].clone()).collect() };
    Ok([
        metrics_of(&column(0)),
        metrics_of(&column(1)),
        metrics_of(&column(2)),
    ])
}

/// Regenerates the synthetic dataset for every value and evaluates it.
pub fn sweep(axis: SweepAxis, values: &[f64], base: &PipelineConfig) -> Result<Vec<SweepRow>> {
    if values.len() < 2 {
        return Err(Error::Config(format!(
            "a sweep needs at least 2 values, got {}",
            values.len()
        )));
    }
    values
        .iter()
        .map(|&value| {
            let cfg = axis.apply(base, value)?;
            let scenes = gen_dataset(&cfg.synth, cfg.n_scenes)?;
            let [nms, greedy, topk] = compare_sets(&scenes, &cfg)?;
            Ok(SweepRow {
                value,
                nms,
                greedy,
                topk,
            })
        })
        .collect()
}

pub const SWEEP_HEADER: [&str; 10] = [
    "axis",
    "value",
    "scene_count",
    "nms_ap",
    "nms_recall",
    "nms_ideal_recall",
    "greedy_ap",
    "greedy_recall",
    "greedy_ideal_recall",
    "topk_ideal_recall",
];

pub fn sweep_csv(axis: SweepAxis, rows: &[SweepRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                axis.name().to_string(),
                fmt_sig6(r.value),
                r.nms.scene_count.to_string(),
                fmt_sig6(r.nms.ap),
                fmt_sig6(r.nms.recall),
                fmt_sig6(r.nms.ideal_recall),
                fmt_sig6(r.greedy.ap),
                fmt_sig6(r.greedy.recall),
                fmt_sig6(r.greedy.ideal_recall),
                fmt_sig6(r.topk.ideal_recall),
            ]
        })
        .collect();
    csv_table(&SWEEP_HEADER, &body)
}
