use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assignment::GreedyMatchConfig;
use crate::error::{Error, Result};
use crate::filtermodel::FilterConfig;
use crate::selection::SelectorConfig;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub scenes: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Everything a pipeline run needs. Serialized as a single JSON document with
/// these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub selector: SelectorConfig,
    pub greedy: GreedyMatchConfig,
    pub filter: FilterConfig,
    pub synth: SynthConfig,
    /// Scenes produced by `gen` and used by `sweep`.
    pub n_scenes: usize,
    pub paths: PathsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            selector: SelectorConfig::default(),
            greedy: GreedyMatchConfig::default(),
            filter: FilterConfig::default(),
            synth: SynthConfig::default(),
            n_scenes: 100,
            paths: PathsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.selector.validate()?;
        self.greedy.validate()?;
        self.filter.validate()?;
        self.synth.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
