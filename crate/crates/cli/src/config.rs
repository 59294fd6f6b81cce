use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sfsep_core::experiment::{FreefieldConfig, RoomConfig, SweepConfig};
use sfsep_core::{Quadrature, SeparatorConfig};

/// Everything a command can be configured with. Every section is optional
/// in the file; missing values take the defaults of the reference scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub runs: usize,
    pub filters: FiltersConfig,
    pub freefield: FreefieldConfig,
    pub room: RoomConfig,
    pub sweep: SweepConfig,
    pub custom: CustomConfig,
    pub bench: BenchConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 10,
            filters: FiltersConfig::default(),
            freefield: FreefieldConfig::default(),
            room: RoomConfig::default(),
            sweep: SweepConfig::default(),
            custom: CustomConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiltersConfig {
    pub separator: SeparatorConfig,
    /// Highest order compared against the DFT oracle.
    pub oracle_order: usize,
    /// Oracle transform length; zero picks a power of two above 8 taps.
    pub dft_len: usize,
}

impl Default for FiltersConfig {
    fn default() -> Self {
        Self { separator: SeparatorConfig { order: 2, ..Default::default() }, oracle_order: 2, dft_len: 0 }
    }
}

/// Separation of recorded frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CustomConfig {
    pub separator: SeparatorConfig,
    pub scheme_order: usize,
    pub quadrature: Quadrature,
    pub dc_blocker_hz: Option<f64>,
    /// Binary (`.bin`) or CSV frame file; relative to the config file.
    pub frames: Option<PathBuf>,
}

impl Default for CustomConfig {
    fn default() -> Self {
        Self { separator: SeparatorConfig::default(), scheme_order: 6, quadrature: Quadrature::default(), dc_blocker_hz: None, frames: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub separator: SeparatorConfig,
    pub scheme_order: usize,
    /// Timed steps after the warm-up.
    pub steps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { separator: SeparatorConfig { r: 0.65, order: 5, ..Default::default() }, scheme_order: 6, steps: 48_000 }
    }
}

pub fn load(path: Option<&Path>) -> Result<ExperimentConfig, String> {
    let Some(path) = path else { return Ok(ExperimentConfig::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let (Some(frames), Some(dir)) = (&cfg.custom.frames, path.parent()) {
        if frames.is_relative() {
            cfg.custom.frames = Some(dir.join(frames));
        }
    }
    Ok(cfg)
}
