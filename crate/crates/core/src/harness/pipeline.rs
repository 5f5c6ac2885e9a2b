use rayon::prelude::*;

use super::config::PipelineConfig;
use crate::assignment::{greedy_match, Detection, LabelAssignment};
use crate::error::Result;
use crate::evaluation::{evaluate, EvalScene, PrMetrics};
use crate::filtermodel::{
    apply_score_gap, score_candidates, train_filter, CandidateBatch, FilterParams, TrainOutcome,
};
use crate::ranking::rank_indices;
use crate::selection::{confidence_filter, gather, query_select};
use crate::synth::Scene;

/// Final detections of every scene plus their metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub scenes: Vec<Scene>,
    pub metrics: PrMetrics,
}

fn scores(dets: &[Detection]) -> Vec<f64> {
    dets.iter().map(|d| d.score).collect()
}

/// The sparse query pool of a scene.
pub fn select_pool(scene: &Scene, cfg: &PipelineConfig) -> Vec<Detection> {
    gather(&scene.detections, &query_select(&scene.detections, &cfg.selector))
}

/// Greedy-matching labels of a set of detections, ranked by their own scores.
pub fn label_detections(
    dets: &[Detection],
    scene: &Scene,
    cfg: &PipelineConfig,
) -> Result<LabelAssignment> {
    greedy_match(dets, &scene.ground_truths, &rank_indices(&scores(dets)), &cfg.greedy)
}

/// Selected pools with their greedy-matching labels, ready for training.
pub fn training_set(
    scenes: &[Scene],
    cfg: &PipelineConfig,
) -> Result<Vec<(Vec<Detection>, LabelAssignment)>> {
    scenes
        .par_iter()
        .map(|scene| {
            let pool = select_pool(scene, cfg);
            let labels = label_detections(&pool, scene, cfg)?;
            Ok((pool, labels))
        })
        .collect()
}

/// Select, label and fit the filter.
pub fn train_on_scenes(scenes: &[Scene], cfg: &PipelineConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = training_set(scenes, cfg)?;
    train_filter(&data, &cfg.filter)
}

/// Final detections of one scene: select, rank, score, apply the score gap.
pub fn filter_scene(scene: &Scene, params: &FilterParams, cfg: &PipelineConfig) -> Scene {
    let pool = select_pool(scene, cfg);
    if pool.is_empty() {
        return scene.with_detections(Vec::new());
    }
    let ranks = rank_indices(&scores(&pool));
    let probs = score_candidates(params, &CandidateBatch::new(&pool, &ranks));
    scene.with_detections(apply_score_gap(&pool, &probs, cfg.filter.conf_threshold))
}

pub fn metrics_of(scenes: &[Scene]) -> PrMetrics {
    let eval: Vec<EvalScene<'_>> = scenes
        .iter()
        .map(|s| EvalScene {
            gts: &s.ground_truths,
            dets: &s.detections,
        })
        .collect();
    evaluate(&eval)
}

/// Runs the full filtering pipeline over `scenes`.
pub fn run_pipeline(
    scenes: &[Scene],
    params: &FilterParams,
    cfg: &PipelineConfig,
) -> Result<PipelineReport> {
    cfg.validate()?;
    params.check_consistent()?;
    params.check_matches(&cfg.filter)?;
    let filtered: Vec<Scene> = scenes
        .par_iter()
        .map(|s| filter_scene(s, params, cfg))
        .collect();
    let metrics = metrics_of(&filtered);
    Ok(PipelineReport {
        scenes: filtered,
        metrics,
    })
}

/// Selector output thresholded at the filter's confidence, without the filter.
pub fn selector_baseline(scenes: &[Scene], cfg: &PipelineConfig) -> PipelineReport {
    let filtered: Vec<Scene> = scenes
        .par_iter()
        .map(|s| {
            let pool = select_pool(s, cfg);
            let kept = gather(&pool, &confidence_filter(&pool, cfg.filter.conf_threshold));
            s.with_detections(kept)
        })
        .collect();
    let metrics = metrics_of(&filtered);
    PipelineReport {
        scenes: filtered,
        metrics,
    }
}

pub const METRICS_HEADER: [&str; 6] = ["scene_count", "ap", "ap50", "ap75", "recall", "ideal_recall"];

pub fn metrics_csv(m: &PrMetrics) -> String {
    use super::io::{csv_table, fmt_sig6};
    let row = vec![
        m.scene_count.to_string(),
        fmt_sig6(m.ap),
        fmt_sig6(m.ap50),
        fmt_sig6(m.ap75),
        fmt_sig6(m.recall),
        fmt_sig6(m.ideal_recall),
    ];
    csv_table(&METRICS_HEADER, &[row])
}
