//! Experiment configuration file (TOML). Every section defaults to the
//! built-in values, so a config file only needs the fields it overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classical::MracConfig;
use crate::concerto::ComposerConfig;
use crate::plant::{InertiaParams, LoadModelConfig, PlantError};
use crate::rl_core::TrainerHyper;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("i/o error reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl From<PlantError> for ConfigError {
    fn from(e: PlantError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

/// Plant parameters: inertias, motor scale, offsets, integrator tolerances.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantSection {
    pub j_w_yy: f64,
    pub j_w_yz: f64,
    pub j_w_zz: f64,
    pub j_m_zz: f64,
    /// Action-to-torque scale, N·m.
    pub const_motor: f64,
    /// Diagnostic switch: disable the wing-2/3 −π offset terms.
    pub zero_rest_offset: bool,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub loads: LoadModelConfig,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            j_w_yy: 1e-6,
            j_w_yz: 2e-7,
            j_w_zz: 8e-7,
            j_m_zz: 1e-6,
            const_motor: 0.2,
            zero_rest_offset: false,
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            loads: LoadModelConfig::default(),
        }
    }
}

impl PlantSection {
    pub fn inertia(&self) -> Result<InertiaParams, PlantError> {
        InertiaParams::new(self.j_w_yy, self.j_w_yz, self.j_w_zz, self.j_m_zz)
    }
}

/// Network shapes. The critic keeps its seven-layer structure; the hidden
/// width is the desk-scale knob.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkSection {
    pub actor_hidden: Vec<usize>,
    pub critic_width: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            actor_hidden: vec![128, 128],
            critic_width: 64,
        }
    }
}

/// Capability-perturbation settings (applied once per segment).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TicpSection {
    pub epsilon: f64,
    pub enabled: bool,
}

impl Default for TicpSection {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            enabled: true,
        }
    }
}

/// Edge runtime knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeSection {
    /// Transitions per buffer packet.
    pub batch_size: usize,
    /// Outbound queue capacity (drop-oldest beyond this).
    pub ship_queue: usize,
    /// Ship composed weights every N segments.
    pub weight_ship_segments: u64,
}

impl Default for EdgeSection {
    fn default() -> Self {
        Self {
            batch_size: 16,
            ship_queue: 64,
            weight_ship_segments: 1,
        }
    }
}

/// Run-level settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub control_rate_hz: f64,
    /// Also emit the raw plant trajectory CSV (large).
    pub trajectory_log: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            control_rate_hz: 2000.0,
            trajectory_log: false,
        }
    }
}

/// The whole config tree.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    pub plant: PlantSection,
    pub networks: NetworkSection,
    pub trainer: TrainerHyper,
    pub composer: ComposerConfig,
    pub ticp: TicpSection,
    pub mrac: MracConfig,
    pub edge: EdgeSection,
    pub run: RunSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: FileConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.plant.inertia()?;
        self.plant.loads.validate().map_err(ConfigError::Invalid)?;
        if self.run.control_rate_hz <= 0.0 {
            return Err(ConfigError::Invalid("control_rate_hz must be > 0".into()));
        }
        if self.ticp.epsilon.abs() > 0.2 {
            return Err(ConfigError::Invalid("|ticp.epsilon| must be <= 0.2".into()));
        }
        if !(0.0..=1.0).contains(&self.composer.beta) {
            return Err(ConfigError::Invalid("composer.beta must be in [0,1]".into()));
        }
        if self.networks.actor_hidden.is_empty() {
            return Err(ConfigError::Invalid("actor needs hidden layers".into()));
        }
        Ok(())
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.run.control_rate_hz
    }
}
