//! Autonomous-vehicle controllers: proportional longitudinal law with a
//! quasi-stationary target ramp and a leader-speed safety override, and the
//! lane-variance driven lateral controller.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::dynamics::{clamp_accel, equilibrium_speed, ModelParams};
use crate::error::{Result, SimError};
use crate::lane_change::{hypothetical_accels, Hypothetical, LaneChangeParams};
use crate::drivers::DriverModels;
use crate::metrics::lane_speed_variance;
use crate::ring::{LaneState, RoadState};

/// How the AV derives its steady-state target speed from lane occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetMode {
    /// `v*((n + l_v) / L)`, the argument taken literally.
    PaperLiteral,
    /// `v*(L / n)`, the lane's uniform headway.
    Headway,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlParams {
    /// Proportional gain [1/s].
    pub k: f64,
    pub v_min: f64,
    pub t_tr: f64,
    pub gap_safe: f64,
    pub c1: f64,
    pub t1: f64,
    pub t2: f64,
    pub target_mode: TargetMode,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            k: 1.0,
            v_min: 2.0,
            t_tr: 100.0,
            gap_safe: 7.0,
            c1: 0.5,
            t1: 10.0,
            t2: 10.0,
            target_mode: TargetMode::Headway,
        }
    }
}

impl ControlParams {
    pub fn validate(&self, model: &ModelParams) -> Result<()> {
        let ok = self.k > 0.0
            && self.t_tr > 0.0
            && self.v_min >= 0.0
            && self.gap_safe > model.l_v
            && self.c1 >= 0.0
            && self.t1 > 0.0
            && self.t2 >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::config(
                "control parameters need k > 0, t_tr > 0, v_min >= 0, gap_safe > l_v, c1 >= 0, t1 > 0, t2 >= 0",
            ))
        }
    }
}

/// Steady-state speed the AV aims for in a lane of `length` holding `count`
/// vehicles (the AV included).
pub fn target_speed_for(length: f64, count: usize, p: &ControlParams, model: &ModelParams) -> Result<f64> {
    let n = count as f64;
    match p.target_mode {
        TargetMode::Headway => equilibrium_speed(length / n, model),
        TargetMode::PaperLiteral => equilibrium_speed((n + model.l_v) / length, model),
    }
}

pub fn av_target_speed(lane: &LaneState, p: &ControlParams, model: &ModelParams) -> Result<f64> {
    target_speed_for(lane.length, lane.len(), p, model)
}

pub fn ramp_speed(t: f64, v_star: f64, p: &ControlParams) -> f64 {
    if t >= p.t_tr {
        v_star
    } else {
        p.v_min + (v_star - p.v_min) * (t / p.t_tr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvCommand {
    /// Capped acceleration.
    pub accel: f64,
    pub target: f64,
    pub override_active: bool,
}

/// Proportional longitudinal law. `v_star` is the lane's steady-state target.
pub fn av_accel(
    v_av: f64,
    gap: f64,
    v_leader: f64,
    t: f64,
    v_star: f64,
    p: &ControlParams,
    model: &ModelParams,
) -> Result<AvCommand> {
    if !(gap > model.l_v) {
        return Err(SimError::Collision(format!(
            "AV gap {gap} is not larger than vehicle length {}",
            model.l_v
        )));
    }
    let mut target = ramp_speed(t, v_star, p);
    let override_active = gap < p.gap_safe;
    if override_active {
        target = target.min(v_leader);
    }
    Ok(AvCommand {
        accel: clamp_accel(-p.k * (v_av - target), model),
        target,
        override_active,
    })
}

/// Windowed per-lane spatial speed variance, one sample per timestep.
#[derive(Debug, Clone)]
pub struct VarianceWindow {
    dt: f64,
    window_steps: u64,
    lanes: usize,
    samples: VecDeque<(u64, Vec<f64>)>,
}

impl VarianceWindow {
    pub fn new(lanes: usize, dt: f64, t1: f64) -> Self {
        Self {
            dt,
            window_steps: (t1 / dt).round().max(1.0) as u64,
            lanes,
            samples: VecDeque::new(),
        }
    }

    /// Appends a sample for timestep `step` and evicts samples older than
    /// the window.
    pub fn push(&mut self, step: u64, variances: Vec<f64>) {
        debug_assert_eq!(variances.len(), self.lanes);
        self.samples.push_back((step, variances));
        while let Some(&(s, _)) = self.samples.front() {
            if s + self.window_steps <= step {
                self.samples.pop_front();
            } else {
                break;
            }
        }
    }

    /// Riemann sum of the stored samples of `lane` times `dt`.
    pub fn integral(&self, lane: usize) -> f64 {
        self.samples.iter().map(|(_, v)| v[lane]).sum::<f64>() * self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn update_variance_windows(win: &mut VarianceWindow, road: &RoadState, step: u64) {
    win.push(step, road.lanes.iter().map(lane_speed_variance).collect());
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralDecision {
    pub vid: u32,
    pub from: usize,
    pub to: usize,
    pub own_integral: f64,
    pub target_integral: f64,
    pub prediction: Hypothetical,
}

/// Lane to move the AV into, if any.
pub fn av_lateral_decide(
    road: &RoadState,
    av_id: u32,
    win: &VarianceWindow,
    p: &ControlParams,
    lc: &LaneChangeParams,
    drivers: &DriverModels,
    t: f64,
) -> Option<LateralDecision> {
    if !(t > p.t1) {
        return None;
    }
    let (lane, idx) = road.locate(av_id)?;
    let av = &road.lanes[lane].vehicles[idx];
    let last = av.last_lc_time.max(0.0);
    if !(t > p.t2 + last) {
        return None;
    }
    let own = win.integral(lane);
    let mut best: Option<LateralDecision> = None;
    for to in road.adjacent_lanes(lane) {
        let other = win.integral(to);
        if !(other > p.c1 + own) {
            continue;
        }
        let Ok(h) = hypothetical_accels(road, av_id, to, drivers, t) else {
            continue;
        };
        if !h.is_safe(lc) {
            continue;
        }
        if best.map_or(true, |b| other > b.target_integral) {
            best = Some(LateralDecision {
                vid: av_id,
                from: lane,
                to,
                own_integral: own,
                target_integral: other,
                prediction: h,
            });
        }
    }
    best
}
