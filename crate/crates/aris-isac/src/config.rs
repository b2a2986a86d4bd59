//! Experiment configuration.
//!
//! All user-facing powers are in dBm and ratios in dB; accessors convert to
//! the linear milliwatt units the rest of the crate works in. Precedence is
//! built-in defaults, then a TOML file, then `key=value` overrides, each
//! layer replacing whole keys. Unknown keys are rejected by name.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::channel::ChannelParams;
use crate::beamforming::LinkBudget;
use crate::geometry::MapSpec;
use crate::sensing::SensingParams;
use crate::{Error, Result};

/// Convert dBm (or dB) to linear milliwatts (or ratio).
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Full experiment configuration with defaults for the reference system.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// AP antennas (M).
    pub num_ap_antennas: usize,
    /// RIS reflecting elements (N).
    pub num_ris_elements: usize,
    /// Single-antenna downlink users (K).
    pub num_users: usize,
    /// AP transmit power budget, dBm.
    pub ap_power_dbm: f64,
    /// User receiver noise power, dBm.
    pub noise_user_dbm: f64,
    /// AP receiver noise power, dBm.
    pub noise_ap_dbm: f64,
    /// Self-interference channel power, dBm.
    pub si_power_dbm: f64,
    /// Per-user downlink SINR threshold, dB.
    pub sinr_threshold_db: f64,
    /// Reference communication path power gain at 1 m, dB.
    pub beta0_db: f64,
    /// Reference two-way sensing power gain at 1 m, dB.
    pub beta_s_db: f64,
    /// System bandwidth, Hz.
    pub bandwidth_hz: f64,
    /// Matched-filter processing gain (linear).
    pub processing_gain: f64,
    /// Proportionality constant between range variance and 1/SNR.
    pub variance_scale: f64,
    /// Element spacing over wavelength for both arrays.
    pub element_spacing_over_wavelength: f64,
    /// Half-width of the square service area, m.
    pub half_width_m: f64,
    /// ARIS flight altitude, m.
    pub altitude_m: f64,
    /// Slot duration, s.
    pub slot_duration_s: f64,
    /// Slots per episode.
    pub slots_per_episode: usize,
    /// Maximum ARIS speed per axis, m/s.
    pub max_speed_mps: f64,
    /// AP ground position, m.
    pub ap_position: [f64; 2],
    /// ARIS start ground position, m.
    pub aris_start: [f64; 2],
    /// Target ground position, m.
    pub target_position: [f64; 2],
    /// User ground positions, m; length must equal `num_users`.
    pub user_positions: Vec<[f64; 2]>,
    /// Reward penalty applied when an action would leave the map.
    pub oob_penalty: f64,
    /// Discount factor.
    pub discount: f64,
    /// Target-network soft update rate.
    pub soft_update: f64,
    /// Adam learning rate for actor and critic.
    pub learning_rate: f64,
    /// Replay buffer capacity.
    pub buffer_capacity: usize,
    /// Mini-batch size.
    pub batch_size: usize,
    /// Training episodes.
    pub episodes: usize,
    /// Hidden layer widths shared by actor and critic.
    pub hidden_layers: Vec<usize>,
    /// Gradient updates performed after each episode.
    pub updates_per_episode: usize,
    /// Initial exploration noise standard deviation, m/s.
    pub exploration_std: f64,
    /// Multiplicative exploration decay per episode.
    pub exploration_decay: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_ap_antennas: 16,
            num_ris_elements: 16,
            num_users: 3,
            ap_power_dbm: 40.0,
            noise_user_dbm: -100.0,
            noise_ap_dbm: -110.0,
            si_power_dbm: -110.0,
            sinr_threshold_db: 10.0,
            beta0_db: -20.0,
            beta_s_db: -47.0,
            bandwidth_hz: 1e6,
            processing_gain: 1e5,
            variance_scale: 3.5,
            element_spacing_over_wavelength: 0.5,
            half_width_m: 100.0,
            altitude_m: 50.0,
            slot_duration_s: 1.0,
            slots_per_episode: 12,
            max_speed_mps: 8.0,
            ap_position: [0.0, -120.0],
            aris_start: [0.0, -80.0],
            target_position: [60.0, 40.0],
            user_positions: vec![[-65.0, -40.0], [-50.0, -25.0], [-35.0, -55.0]],
            oob_penalty: 10.0,
            discount: 0.95,
            soft_update: 0.005,
            learning_rate: 3e-4,
            buffer_capacity: 8000,
            batch_size: 70,
            episodes: 500,
            hidden_layers: vec![300, 100, 100],
            updates_per_episode: 1,
            exploration_std: 2.0,
            exploration_decay: 0.995,
        }
    }
}

impl ExperimentConfig {
    /// Reduced profile for quick runs on a workstation.
    pub fn desk() -> Self {
        Self {
            num_ap_antennas: 8,
            num_ris_elements: 8,
            num_users: 2,
            user_positions: vec![[-65.0, -40.0], [-35.0, -55.0]],
            episodes: 200,
            ..Self::default()
        }
    }

    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            beta0: db_to_linear(self.beta0_db),
            beta_s: db_to_linear(self.beta_s_db),
            si_power: db_to_linear(self.si_power_dbm),
            element_spacing_over_wavelength: self.element_spacing_over_wavelength,
            num_ap_antennas: self.num_ap_antennas,
            num_ris_elements: self.num_ris_elements,
            ap_antenna_spacing_over_wavelength: self.element_spacing_over_wavelength,
        }
    }

    pub fn link_budget(&self) -> LinkBudget {
        LinkBudget {
            noise_user: db_to_linear(self.noise_user_dbm),
            noise_ap: db_to_linear(self.noise_ap_dbm),
            sinr_threshold: db_to_linear(self.sinr_threshold_db),
            total_power: db_to_linear(self.ap_power_dbm),
        }
    }

    pub fn sensing_params(&self) -> SensingParams {
        SensingParams {
            variance_scale: self.variance_scale,
            processing_gain: self.processing_gain,
            noise_ap: db_to_linear(self.noise_ap_dbm),
        }
    }

    pub fn map_spec(&self) -> MapSpec {
        MapSpec {
            w_max: self.half_width_m,
            altitude: self.altitude_m,
            delta_t: self.slot_duration_s,
            total_slots: self.slots_per_episode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_ap_antennas == 0 || self.num_ris_elements == 0 {
            return bad("array sizes must be positive".into());
        }
        if self.num_users > self.num_ap_antennas {
            return bad(format!(
                "num_users ({}) must not exceed num_ap_antennas ({})",
                self.num_users, self.num_ap_antennas
            ));
        }
        if self.user_positions.len() != self.num_users {
            return bad(format!(
                "user_positions has {} entries but num_users is {}",
                self.user_positions.len(),
                self.num_users
            ));
        }
        if self.slots_per_episode == 0 || self.episodes == 0 {
            return bad("slots_per_episode and episodes must be positive".into());
        }
        if !(self.half_width_m > 0.0 && self.altitude_m > 0.0 && self.slot_duration_s > 0.0) {
            return bad("map dimensions and slot duration must be positive".into());
        }
        if self.max_speed_mps < 0.0 {
            return bad("max_speed_mps must be non-negative".into());
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return bad("batch_size must be in 1..=buffer_capacity".into());
        }
        if !(0.0..=1.0).contains(&self.discount) || !(0.0..=1.0).contains(&self.soft_update) {
            return bad("discount and soft_update must lie in [0, 1]".into());
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return bad("hidden_layers must be non-empty with positive widths".into());
        }
        for p in self
            .user_positions
            .iter()
            .chain([&self.target_position, &self.aris_start])
        {
            if p[0].abs() > self.half_width_m || p[1].abs() > self.half_width_m {
                return bad(format!("position ({}, {}) lies outside the map", p[0], p[1]));
            }
        }
        Ok(())
    }
}

fn parse_toml_value(raw: &str) -> toml::Value {
    let quoted;
    let attempt = format!("x = {raw}");
    let table: Option<toml::Table> = attempt.parse().ok();
    let table = match table {
        Some(t) => t,
        None => {
            quoted = format!("x = {raw:?}");
            quoted.parse().expect("quoted string is valid TOML")
        }
    };
    table["x"].clone()
}

/// Load configuration with defaults -> file -> `key=value` overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table = toml::Table::try_from(ExperimentConfig::default())
        .expect("default config serializes to a table");
    if let Some(p) = path {
        let text = std::fs::read_to_string(p)?;
        let file: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        for (k, v) in file {
            if !table.contains_key(&k) {
                return Err(Error::Config(format!("unknown config key `{k}`")));
            }
            table.insert(k, v);
        }
    }
    for s in overrides {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
        let (k, v) = (k.trim(), v.trim());
        if !table.contains_key(k) {
            return Err(Error::Config(format!("unknown config key `{k}`")));
        }
        table.insert(k.to_string(), parse_toml_value(v));
    }
    let cfg: ExperimentConfig = table
        .try_into()
        .map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
