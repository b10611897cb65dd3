//! Experiment description, read from and written to TOML.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::control::ControlParams;
use crate::dynamics::{IdmParams, ModelParams};
use crate::error::{Result, SimError};
use crate::lane_change::LaneChangeParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// One entry per lane [m]; the lane count is the length of this list.
    pub lane_lengths: Vec<f64>,
    pub n_per_lane: Vec<usize>,
    pub dt: f64,
    pub t_f: f64,
    pub perturbation_amplitude: f64,
    pub seed: u64,
    /// Trajectory recording interval in steps; 0 disables recording.
    pub sample_stride: u32,
    /// Averaging window for run metrics [s].
    pub metrics_window: f64,
    pub idm_enabled: bool,
    pub av_enabled: bool,
    pub av_lane: usize,
    /// Fraction of collaborative drivers per lane.
    pub collab_fraction: f64,
    pub alpha_s: f64,
    pub beta_s: f64,
    pub model: ModelParams,
    pub idm: IdmParams,
    pub lc: LaneChangeParams,
    pub ctl: ControlParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            lane_lengths: vec![240.0; 3],
            n_per_lane: vec![24; 3],
            dt: 0.02,
            t_f: 1000.0,
            perturbation_amplitude: 1.0,
            seed: 0,
            sample_stride: 50,
            metrics_window: 300.0,
            idm_enabled: false,
            av_enabled: false,
            av_lane: 1,
            collab_fraction: 0.0,
            alpha_s: 2.0,
            beta_s: 60.0,
            model: ModelParams::default(),
            idm: IdmParams::default(),
            lc: LaneChangeParams::default(),
            ctl: ControlParams::default(),
        }
    }
}

impl SimConfig {
    /// Single ring of `length` metres holding `n` vehicles, other settings
    /// at their defaults.
    pub fn single_lane(length: f64, n: usize) -> Self {
        Self {
            lane_lengths: vec![length],
            n_per_lane: vec![n],
            av_lane: 0,
            ..Self::default()
        }
    }

    pub fn lanes(&self) -> usize {
        self.lane_lengths.len()
    }

    pub fn total_steps(&self) -> u64 {
        (self.t_f / self.dt).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.lc.validate()?;
        if self.idm_enabled {
            self.idm.validate()?;
        }
        if self.av_enabled {
            self.ctl.validate(&self.model)?;
        }
        if self.lane_lengths.is_empty() {
            return Err(SimError::config("at least one lane is required"));
        }
        if self.lane_lengths.len() != self.n_per_lane.len() {
            return Err(SimError::config("lane_lengths and n_per_lane differ in length"));
        }
        for (&len, &n) in self.lane_lengths.iter().zip(&self.n_per_lane) {
            if !(len > 0.0 && len.is_finite()) {
                return Err(SimError::config(format!("lane length {len} must be positive")));
            }
            if !(n as f64 * self.model.l_v < len) {
                return Err(SimError::config(format!(
                    "{n} vehicles of length {} do not fit on a {len} m lane",
                    self.model.l_v
                )));
            }
        }
        if !(self.dt > 0.0 && self.t_f > 0.0) {
            return Err(SimError::config("dt and t_f must be positive"));
        }
        if !(0.0..=1.0).contains(&self.collab_fraction) {
            return Err(SimError::config("collab_fraction must lie in [0, 1]"));
        }
        if self.collab_fraction > 0.0 && !(self.alpha_s >= 0.0 && self.beta_s >= 0.0 && self.alpha_s + self.beta_s > 0.0) {
            return Err(SimError::config("alpha_s and beta_s must be non-negative and not both zero"));
        }
        if !(self.perturbation_amplitude >= 0.0) {
            return Err(SimError::config("perturbation_amplitude must be non-negative"));
        }
        if !(self.metrics_window > 0.0 && self.metrics_window <= self.t_f) {
            return Err(SimError::config("metrics_window must lie in (0, t_f]"));
        }
        if self.av_enabled {
            if self.av_lane >= self.lanes() {
                return Err(SimError::config(format!("av_lane {} does not exist", self.av_lane)));
            }
            if self.n_per_lane[self.av_lane] == 0 {
                return Err(SimError::config("the AV lane has no vehicle to convert"));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("SimConfig always serializes")
    }
}
