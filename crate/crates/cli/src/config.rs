use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use viewport_core::predictor::ModelConfig;
use viewport_core::synth::ScenarioScript;

use crate::commands::CliError;

/// How raw trajectories become model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Sampling interval in seconds.
    pub dt: f64,
    /// Saliency kernel width in radians.
    pub sigma: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { dt: 0.5, sigma: PI / 30.0 }
    }
}

/// Contents of the `--config` file. Every table is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub scenario: ScenarioScript,
    pub model: ModelConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                toml::from_str::<RunConfig>(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = seed {
            cfg.scenario.seed = s;
            cfg.model.seed = s;
        }
        if !(cfg.data.dt > 0.0 && cfg.data.sigma > 0.0) {
            return Err(CliError::Usage("data.dt and data.sigma must be positive".into()));
        }
        cfg.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}
