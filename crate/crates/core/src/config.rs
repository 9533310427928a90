//! Flat configuration shared by every module. All keys are optional in a
//! TOML override file; unknown keys are rejected so typos surface.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::awareness::AwarenessConfig;
use crate::geometry::CameraModel;
use crate::kinematics::KinematicsConfig;
use crate::protocol::LinkModel;
use crate::sharedref::SharedRefConfig;

/// Environment variable naming a TOML file of config overrides.
pub const CONFIG_ENV: &str = "SIM_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    // kinematics
    pub v_max: f64,
    pub omega_max: f64,
    pub tap_angle_deg: f64,
    pub tap_cancelable: bool,
    // camera
    pub hfov_deg: f64,
    pub image_width: f64,
    pub image_height: f64,
    pub head_row: f64,
    // awareness
    pub move_hi_mps: f64,
    pub move_lo_mps: f64,
    pub window_s: f64,
    // shared references
    pub elbow_min_deg: f64,
    pub debounce_frames: u32,
    pub gesture_ttl_s: f64,
    pub click_ttl_s: f64,
    pub ray_extent_m: f64,
    pub skeleton_noise_px: f64,
    // world and agents
    pub dwell_s: f64,
    pub lag_gap_m: f64,
    pub target_gap_m: f64,
    pub walk_speed_mps: f64,
    pub walk_speed_jitter_mps: f64,
    pub follow_gain: f64,
    pub point_s: f64,
    pub tap_reach_m: f64,
    pub tap_cooldown_s: f64,
    pub telemetry_hz: f64,
    pub max_time_s: f64,
    // network
    pub delay_ms: u64,
    pub jitter_ms: u64,
    pub drop_prob: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            omega_max: PI / 2.0,
            tap_angle_deg: 90.0,
            tap_cancelable: false,
            hfov_deg: 120.0,
            image_width: 1280.0,
            image_height: 720.0,
            head_row: 240.0,
            move_hi_mps: 0.20,
            move_lo_mps: 0.10,
            window_s: 0.5,
            elbow_min_deg: 160.0,
            debounce_frames: 5,
            gesture_ttl_s: 3.0,
            click_ttl_s: 5.0,
            ray_extent_m: 3.0,
            skeleton_noise_px: 1.0,
            dwell_s: 5.0,
            lag_gap_m: 2.5,
            target_gap_m: 1.2,
            walk_speed_mps: 0.8,
            walk_speed_jitter_mps: 0.1,
            follow_gain: 1.0,
            point_s: 2.0,
            tap_reach_m: 1.5,
            tap_cooldown_s: 4.0,
            telemetry_hz: 20.0,
            max_time_s: 600.0,
            delay_ms: 50,
            jitter_ms: 10,
            drop_prob: 0.0,
        }
    }
}

impl SimConfig {
    /// Defaults overridden by the file named in `SIM_CONFIG`, if set.
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(path) => Self::from_file(Path::new(&path)),
            None => Ok(Self::default()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    // negated comparisons so NaN fails too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if !(self.v_max > 0.0 && self.omega_max > 0.0) {
            return bad("v_max and omega_max must be positive");
        }
        if !(self.move_lo_mps <= self.move_hi_mps) {
            return bad("move_lo_mps must not exceed move_hi_mps");
        }
        if !(self.window_s > 0.0 && self.telemetry_hz > 0.0 && self.max_time_s > 0.0) {
            return bad("window_s, telemetry_hz and max_time_s must be positive");
        }
        if !(self.ray_extent_m > 0.0 && self.gesture_ttl_s > 0.0 && self.click_ttl_s > 0.0) {
            return bad("ray extent and reference TTLs must be positive");
        }
        if !(self.walk_speed_mps > self.walk_speed_jitter_mps.abs() && self.target_gap_m > 0.0) {
            return bad("walk speed and target gap must be positive");
        }
        if !(0.0..1.0).contains(&self.drop_prob) {
            return bad("drop_prob must lie in [0, 1)");
        }
        self.camera()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn kinematics(&self) -> KinematicsConfig {
        KinematicsConfig {
            v_max: self.v_max,
            omega_max: self.omega_max,
            tap_angle: self.tap_angle_deg.to_radians(),
            tap_cancelable: self.tap_cancelable,
        }
    }

    pub fn camera(&self) -> CameraModel {
        CameraModel {
            hfov: self.hfov_deg.to_radians(),
            image_width: self.image_width,
            image_height: self.image_height,
            head_row: self.head_row,
            ..CameraModel::default()
        }
    }

    pub fn awareness(&self) -> AwarenessConfig {
        AwarenessConfig {
            move_hi_mps: self.move_hi_mps,
            move_lo_mps: self.move_lo_mps,
            window_s: self.window_s,
        }
    }

    pub fn sharedref(&self) -> SharedRefConfig {
        SharedRefConfig {
            elbow_min_deg: self.elbow_min_deg,
            debounce_frames: self.debounce_frames,
            gesture_ttl_s: self.gesture_ttl_s,
            click_ttl_s: self.click_ttl_s,
            ray_extent_m: self.ray_extent_m,
            ..SharedRefConfig::default()
        }
    }

    /// Link model for one direction; `salt` separates uplink and downlink streams.
    pub fn link(&self, seed: u64, salt: u64) -> LinkModel {
        LinkModel {
            one_way_delay_ms: self.delay_ms,
            jitter_ms: self.jitter_ms,
            drop_prob: self.drop_prob,
            seed: seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        }
    }
}
