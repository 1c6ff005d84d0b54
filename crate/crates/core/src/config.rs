//! Engine configuration file (JSON). Every key is optional.
//!
//! ```json
//! {
//!   "camera": { "focal_length_px": 910.0 },
//!   "user": { "gender": "female", "height_cm": 162.0 },
//!   "button": { "center_uv": [1100.0, 160.0], "depth_threshold_cm": 20.0 },
//!   "pipeline": { "gap_reset_ms": 500 },
//!   "rules": { "mirror_u": false },
//!   "sim": { "tick_rate_hz": 100.0, "profiles": "profiles.json", "drain_ms": 10000 }
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depth::{
    AnchorProfile, CameraModel, DepthError, Gender, PalmWidthTable, DEFAULT_DEPTH_THRESHOLD_CM,
};
use crate::pipeline::DEFAULT_GAP_RESET_MS;
use crate::rules::{RuleTable, RuleTableError};
use crate::sim::{GaitLibrary, JointLimits, SimError, DEFAULT_TICK_RATE_HZ};

/// Environment variable naming a config file when none is given.
pub const CONFIG_ENV: &str = "GESTGAIT_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Depth(#[from] DepthError),
    #[error(transparent)]
    Rules(#[from] RuleTableError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub focal_length_px: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        // roughly a 70 degree horizontal field of view at 1280 px
        Self {
            focal_length_px: 910.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserConfig {
    pub gender: Gender,
    pub height_cm: f64,
    /// Measured palm width; overrides the lookup table.
    pub palm_width_cm: Option<f64>,
}

impl Default for UserConfig {
    fn default() -> Self {
        Self {
            gender: Gender::Unspecified,
            height_cm: 170.0,
            palm_width_cm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ButtonConfig {
    /// Button centre in pixels; the frame centre when absent.
    pub center_uv: Option<[f64; 2]>,
    pub half_extent_px: f64,
    pub depth_threshold_cm: f64,
    pub release_margin_cm: f64,
}

impl Default for ButtonConfig {
    fn default() -> Self {
        Self {
            center_uv: None,
            half_extent_px: 60.0,
            depth_threshold_cm: DEFAULT_DEPTH_THRESHOLD_CM,
            release_margin_cm: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub gap_reset_ms: i64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gap_reset_ms: DEFAULT_GAP_RESET_MS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RulesConfig {
    /// Mirror landmarks horizontally before classifying (other hand).
    pub mirror_u: bool,
    /// Replacement rule table; the built-in table when absent.
    pub table: Option<RuleTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub tick_rate_hz: f64,
    /// Gait profile file; the bundled profiles when absent.
    pub profiles: Option<PathBuf>,
    /// How long replay keeps the simulator running after the last frame.
    pub drain_ms: i64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tick_rate_hz: DEFAULT_TICK_RATE_HZ,
            profiles: None,
            drain_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub camera: CameraConfig,
    pub user: UserConfig,
    pub button: ButtonConfig,
    pub pipeline: PipelineConfig,
    pub rules: RulesConfig,
    pub sim: SimConfig,
}

impl EngineConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        if let Some(table) = &cfg.rules.table {
            table.validate()?;
        }
        Ok(cfg)
    }

    /// Loads a config file. A relative profile path is taken relative to
    /// the config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        if let (Some(p), Some(dir)) = (&cfg.sim.profiles, path.parent()) {
            if p.is_relative() {
                cfg.sim.profiles = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    /// `explicit` if given, else the file named by `GESTGAIT_CONFIG`, else
    /// defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(PathBuf::from(p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn camera(&self) -> Result<CameraModel, DepthError> {
        CameraModel::new(self.camera.focal_length_px)
    }

    pub fn anchor_profile(&self) -> Result<AnchorProfile, DepthError> {
        AnchorProfile::for_user(
            self.user.gender,
            self.user.height_cm,
            self.user.palm_width_cm,
            &PalmWidthTable::default(),
        )
    }

    pub fn rule_table(&self) -> RuleTable {
        self.rules.table.clone().unwrap_or_default()
    }

    pub fn gait_library(&self) -> Result<GaitLibrary, ConfigError> {
        match &self.sim.profiles {
            None => Ok(GaitLibrary::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                    path: path.clone(),
                    source,
                })?;
                Ok(GaitLibrary::from_json(&text, &JointLimits::default())?)
            }
        }
    }
}
