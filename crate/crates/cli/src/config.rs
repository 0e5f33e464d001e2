use std::path::Path;

use cdhf_core::eval::SplitMode;
use cdhf_core::models::{LogisticParams, TreeParams};
use cdhf_core::simulator::{ProgrammerProfile, SimulationConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Everything a run can be configured with. Every field has a default, so
/// an empty file is a valid config; command-line flags override the file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Root seed; every random stream is derived from it by name.
    pub seed: u64,
    /// Cohort shape. Its own `seed` field is replaced by the root seed.
    pub simulation: SimulationConfig,
    /// Profile shared by all simulated programmers.
    pub profile: Option<ProgrammerProfile>,
    pub ingest: IngestSection,
    pub split: SplitSection,
    pub trees: TreeParams,
    pub logistic: LogisticParams,
    pub policy: PolicySection,
    pub sample_complexity: SampleSection,
    pub regression: RegressionSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub gap_minutes: f64,
    pub prompt_bytes: usize,
}

impl Default for IngestSection {
    fn default() -> Self {
        Self {
            gap_minutes: 30.0,
            prompt_bytes: cdhf_core::telemetry::DEFAULT_PROMPT_BYTE_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub mode: SplitMode,
    pub ratios: [f64; 3],
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            mode: SplitMode::ByProgrammer,
            ratios: [0.7, 0.1, 0.2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    /// Required share of rejects among hidden suggestions at each stage.
    pub target_precision: f64,
    /// Grid resolution: thresholds 0, 1/steps, ..., 1 on both axes.
    pub grid_steps: usize,
    /// Fixed thresholds; when both are set they replace selection.
    pub v1: Option<f64>,
    pub v2: Option<f64>,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            target_precision: 0.9,
            grid_steps: 100,
            v1: None,
            v2: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub enabled: bool,
    pub fractions: Vec<f64>,
    pub seeds: usize,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            enabled: true,
            fractions: vec![0.01, 0.02, 0.05, 0.1, 0.25, 0.5, 1.0],
            seeds: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionKind {
    Linear,
    Trees,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionSection {
    pub enabled: bool,
    pub method: RegressionKind,
    pub n_trees: usize,
}

impl Default for RegressionSection {
    fn default() -> Self {
        Self {
            enabled: true,
            method: RegressionKind::Trees,
            n_trees: 100,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn profile(&self) -> ProgrammerProfile {
        self.profile.clone().unwrap_or_default()
    }

    pub fn ingest_options(&self) -> cdhf_core::telemetry::IngestOptions {
        cdhf_core::telemetry::IngestOptions {
            gap_limit_ms: (self.ingest.gap_minutes * 60_000.0).round() as u64,
            prompt_byte_budget: self.ingest.prompt_bytes,
        }
    }
}
