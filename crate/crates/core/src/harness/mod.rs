//! Pipeline orchestration, file formats and ablation sweeps.

pub mod commands;
mod config;
pub mod io;
mod pipeline;
mod sweep;

pub use config::{PathsConfig, PipelineConfig};
pub use pipeline::{
    filter_scene, label_detections, metrics_csv, metrics_of, run_pipeline, select_pool,
    selector_baseline, train_on_scenes, training_set, PipelineReport, METRICS_HEADER,
};
pub use sweep::{comparison_sets, compare_sets, sweep, sweep_csv, SweepAxis, SweepRow, SWEEP_HEADER};
