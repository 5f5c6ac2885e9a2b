//! JSON-lines scene and label files, CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assignment::LabelAssignment;
use crate::error::{Error, Result};
use crate::synth::Scene;

pub fn parse_scenes(text: &str, path: &Path) -> Result<Vec<Scene>> {
    let mut scenes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let scene: Scene = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        for (j, g) in scene.ground_truths.iter().enumerate() {
            if !g.bbox.is_valid() {
                return Err(err(format!("ground truth {j} has an invalid box")));
            }
        }
        for (j, d) in scene.detections.iter().enumerate() {
            if !d.is_valid() {
                return Err(err(format!(
                    "detection {j} has an invalid box or a score outside [0, 1]"
                )));
            }
        }
        scenes.push(scene);
    }
    Ok(scenes)
}

pub fn read_scenes(path: &Path) -> Result<Vec<Scene>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenes(&text, path)
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn encode_scenes(scenes: &[Scene]) -> String {
    jsonl(scenes)
}

pub fn write_scenes(path: &Path, scenes: &[Scene]) -> Result<()> {
    write_text(path, &encode_scenes(scenes))
}

/// Greedy-matching labels of one scene, one record per detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLabels {
    pub scene_id: String,
    pub labels: LabelAssignment,
}

pub fn encode_labels(labels: &[SceneLabels]) -> String {
    jsonl(labels)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `%.6g`-style formatting: six significant digits, trailing zeros removed.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes a CSV table with a header row.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    writeln!(out, "{}", header.join(",")).unwrap();
    for r in rows {
        writeln!(out, "{}", r.join(",")).unwrap();
    }
    out
}
