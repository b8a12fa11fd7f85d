//! One JSON document holding every tunable of a run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::AssemblyConfig;
use crate::dmp::DmpConfig;
use crate::ktc::TeachingScenario;
use crate::se3::Pose;
use crate::synthetic::reference_waypoints;
use crate::vision::SweepConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("file={file}: {message}")]
    Io { file: String, message: String },
    #[error("file={file} line={line} column={column}: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed. `resolve` copies it into every seeded section.
    pub seed: u64,
    pub dmp: DmpConfig,
    pub teach: TeachingScenario,
    /// Waypoints the simulated operator follows.
    pub teach_path: Vec<Pose>,
    pub sweep: SweepConfig,
    pub assembly: AssemblyConfig,
    pub batch_n: usize,
    pub rollout: RolloutConfig,
}

/// Rollout overrides; absent fields fall back to the DMP's demonstration values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutConfig {
    pub start: Option<Pose>,
    pub goal: Option<Pose>,
    /// s
    pub tau: Option<f64>,
    /// s, defaults to `dmp.dt`.
    pub dt: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dmp: DmpConfig::default(),
            teach: TeachingScenario::default(),
            teach_path: reference_waypoints(),
            sweep: SweepConfig::default(),
            assembly: AssemblyConfig::default(),
            batch_n: 20,
            rollout: RolloutConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, source: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            file: source.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            file: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Applies an optional seed override and propagates the master seed.
    pub fn resolve(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.sweep.seed = self.seed;
        self.teach.sim.seed = self.seed;
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
