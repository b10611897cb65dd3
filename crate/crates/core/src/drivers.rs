//! Per-class acceleration dispatch shared by the integrator and the
//! lane-change predictors.

use crate::control::{av_accel, target_speed_for, AvCommand, ControlParams};
use crate::dynamics::{bando_ftl_accel, clamp_accel, idm_accel, IdmParams, ModelParams};
use crate::error::Result;
use crate::ring::{VehicleClass, VehicleState};

/// Longitudinal laws for every vehicle class in a run.
#[derive(Debug, Clone, Copy)]
pub struct DriverModels {
    pub model: ModelParams,
    /// When set, human drivers follow IDM instead of Bando-FTL.
    pub idm: Option<IdmParams>,
    /// AV controller constants, `None` when no AV is simulated.
    pub ctl: Option<ControlParams>,
}

/// Surroundings of a (possibly hypothetical) vehicle placement.
#[derive(Debug, Clone, Copy)]
pub struct Situation {
    pub gap: f64,
    pub v_leader: f64,
    pub lane_length: f64,
    /// Vehicles in the lane, counting the one being evaluated.
    pub lane_count: usize,
    pub t: f64,
}

impl DriverModels {
    pub fn new(model: ModelParams, idm: Option<IdmParams>, ctl: Option<ControlParams>) -> Self {
        Self { model, idm, ctl }
    }

    /// Capped acceleration of `v` in situation `s`.
    pub fn accel(&self, v: &VehicleState, s: &Situation) -> Result<f64> {
        match (v.class, self.ctl) {
            (VehicleClass::Av, Some(ctl)) => Ok(self.av_command(v, s, &ctl)?.accel),
            _ => self.human_accel(v, s),
        }
    }

    pub fn av_command(&self, v: &VehicleState, s: &Situation, ctl: &ControlParams) -> Result<AvCommand> {
        let v_star = target_speed_for(s.lane_length, s.lane_count, ctl, &self.model)?;
        av_accel(v.vel, s.gap, s.v_leader, s.t, v_star, ctl, &self.model)
    }

    /// Uncapped car-following acceleration of `v`, whatever its class.
    /// Used to judge whether a placement is safe.
    pub fn safety_accel(&self, v: &VehicleState, s: &Situation) -> Result<f64> {
        match self.idm {
            Some(q) => idm_accel(v.vel, s.gap - self.model.l_v, v.vel - s.v_leader, &q),
            None => bando_ftl_accel(v.vel, s.gap, s.v_leader, &self.model.with_weights(v.alpha, v.beta)),
        }
    }

    fn human_accel(&self, v: &VehicleState, s: &Situation) -> Result<f64> {
        Ok(clamp_accel(self.safety_accel(v, s)?, &self.model))
    }
}
