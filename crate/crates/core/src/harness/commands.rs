//! The CLI subcommands as library functions. Text outputs go to `out` when
//! given, otherwise to stdout.

use std::io::Write;
use std::path::Path;

use super::config::PipelineConfig;
use super::io::{encode_labels, encode_scenes, read_scenes, write_text, SceneLabels};
use super::pipeline::{label_detections, metrics_csv, metrics_of, run_pipeline, select_pool, train_on_scenes};
use super::sweep::{sweep, sweep_csv, SweepAxis};
use crate::error::{Error, Result};
use crate::filtermodel::{read_checkpoint, write_checkpoint, TrainOutcome};
use crate::synth::gen_dataset;

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

/// `gen`: synthetic scenes as JSON lines.
pub fn gen(cfg: &PipelineConfig, out: Option<&Path>) -> Result<usize> {
    cfg.synth.validate()?;
    let scenes = gen_dataset(&cfg.synth, cfg.n_scenes)?;
    emit(out, &encode_scenes(&scenes))?;
    Ok(scenes.len())
}

/// `select`: scenes with detections replaced by the sparse query pool.
pub fn select(cfg: &PipelineConfig, scenes: &Path, out: Option<&Path>) -> Result<()> {
    cfg.selector.validate()?;
    let scenes = read_scenes(scenes)?;
    let pooled: Vec<_> = scenes
        .iter()
        .map(|s| s.with_detections(select_pool(s, cfg)))
        .collect();
    emit(out, &encode_scenes(&pooled))
}

/// `assign`: greedy-matching labels for every detection of every scene.
pub fn assign(cfg: &PipelineConfig, scenes: &Path, out: Option<&Path>) -> Result<()> {
    cfg.greedy.validate()?;
    let scenes = read_scenes(scenes)?;
    let labels = scenes
        .iter()
        .map(|s| {
            Ok(SceneLabels {
                scene_id: s.scene_id.clone(),
                labels: label_detections(&s.detections, s, cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    emit(out, &encode_labels(&labels))
}

/// `train`: fits the filter, writes the checkpoint and optionally the loss trace.
pub fn train(
    cfg: &PipelineConfig,
    scenes: &Path,
    checkpoint: &Path,
    trace: Option<&Path>,
) -> Result<TrainOutcome> {
    let scenes = read_scenes(scenes)?;
    let outcome = train_on_scenes(&scenes, cfg)?;
    write_checkpoint(&outcome.params, checkpoint)?;
    if let Some(path) = trace {
        let mut text = String::from("epoch,mean_loss\n");
        for (i, l) in outcome.loss_trace.iter().enumerate() {
            text.push_str(&format!("{},{}\n", i + 1, super::io::fmt_sig6(*l)));
        }
        write_text(path, &text)?;
    }
    Ok(outcome)
}

/// `run`: full pipeline with a trained checkpoint; metrics CSV to `out`.
pub fn run(
    cfg: &PipelineConfig,
    scenes: &Path,
    checkpoint: &Path,
    out: Option<&Path>,
    detections_out: Option<&Path>,
) -> Result<()> {
    let scenes = read_scenes(scenes)?;
    let params = read_checkpoint(checkpoint)?;
    let report = run_pipeline(&scenes, &params, cfg)?;
    if let Some(path) = detections_out {
        write_text(path, &encode_scenes(&report.scenes))?;
    }
    emit(out, &metrics_csv(&report.metrics))
}

/// `sweep`: one row of comparison metrics per axis value.
pub fn sweep_cmd(cfg: &PipelineConfig, axis: &str, values: &[f64], out: Option<&Path>) -> Result<()> {
    let axis: SweepAxis = axis.parse()?;
    let rows = sweep(axis, values, cfg)?;
    emit(out, &sweep_csv(axis, &rows))
}

/// `eval`: metrics of a scene file whose detections are the predictions.
pub fn eval(detections: &Path, out: Option<&Path>) -> Result<()> {
    let scenes = read_scenes(detections)?;
    emit(out, &metrics_csv(&metrics_of(&scenes)))
}
