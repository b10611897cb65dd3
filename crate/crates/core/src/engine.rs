//! Fixed-step simulation of the hybrid system: seeded initialization,
//! explicit Euler integration with caps and clamps, the lane-change cadence
//! and recording.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::config::SimConfig;
use crate::control::{av_lateral_decide, VarianceWindow};
use crate::drivers::{DriverModels, Situation};
use crate::dynamics::equilibrium_speed;
use crate::error::{Result, SimError};
use crate::lane_change::{lane_change_pass, Hypothetical};
use crate::metrics::{aggregate_run, lane_mean_speed, lane_speed_variance, RunMetrics};
use crate::ring::{LaneState, RoadState, VehicleClass, VehicleState};

const MAX_INIT_ATTEMPTS: usize = 100;

/// Collaborative vehicle count for a lane of `n`: `ceil(p n)`, tolerant of
/// representation error in `p` (0.48 · 25 is 12, not 13).
pub fn collaborative_count(p: f64, n: usize) -> usize {
    ((p * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Evenly spread indices `round(j n / m)` for `j = 0..m`.
pub fn collaborative_indices(n: usize, m: usize) -> Vec<usize> {
    (0..m)
        .map(|j| ((j * n) as f64 / m as f64).round() as usize)
        .collect()
}

pub fn init_state(cfg: &SimConfig, rng: &mut impl Rng) -> Result<RoadState> {
    let mut lanes = Vec::with_capacity(cfg.lanes());
    let mut next_id = 0u32;
    let delta = cfg.perturbation_amplitude;
    for (lane_id, (&length, &n)) in cfg.lane_lengths.iter().zip(&cfg.n_per_lane).enumerate() {
        let mut lane = LaneState::new(lane_id, length);
        if n > 0 {
            let h = length / n as f64;
            let v0 = equilibrium_speed(h, &cfg.model)?;
            let mut placed = None;
            for _ in 0..MAX_INIT_ATTEMPTS {
                let mut pos: Vec<f64> = (0..n)
                    .map(|i| {
                        let u = if delta > 0.0 { rng.gen_range(-delta..delta) } else { 0.0 };
                        let x = (i as f64 * h + u).rem_euclid(length);
                        if x >= length { 0.0 } else { x }
                    })
                    .collect();
                pos.sort_by(f64::total_cmp);
                let mut candidate = LaneState::new(lane_id, length);
                candidate.vehicles = pos
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        VehicleState::new(next_id + i as u32, x, v0, cfg.model.alpha, cfg.model.beta)
                    })
                    .collect();
                if candidate.check(cfg.model.l_v).is_ok() {
                    placed = Some(candidate);
                    break;
                }
            }
            lane = placed.ok_or_else(|| {
                SimError::Domain(format!(
                    "could not place {n} vehicles on lane {lane_id} within {MAX_INIT_ATTEMPTS} draws"
                ))
            })?;
            let m = collaborative_count(cfg.collab_fraction, n);
            for idx in collaborative_indices(n, m) {
                let v = &mut lane.vehicles[idx];
                v.class = VehicleClass::Collaborative;
                v.alpha = cfg.alpha_s;
                v.beta = cfg.beta_s;
            }
            if cfg.av_enabled && lane_id == cfg.av_lane {
                let v = &mut lane.vehicles[0];
                v.class = VehicleClass::Av;
                v.alpha = cfg.model.alpha;
                v.beta = cfg.model.beta;
            }
        }
        next_id += n as u32;
        lanes.push(lane);
    }
    Ok(RoadState { lanes, time: 0.0 })
}

/// Side information produced by one integration step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// Vehicles whose speed was clamped at zero, with their lane.
    pub clamped: Vec<(u32, usize)>,
    /// AV id, lane, target speed and whether the safety override was active.
    pub av: Option<(u32, usize, f64, bool)>,
}

/// One explicit Euler step from the frozen state at `road.time`.
pub fn step(road: &mut RoadState, drivers: &DriverModels, dt: f64) -> Result<StepReport> {
    let t = road.time;
    let mut report = StepReport::default();
    let mut accels: Vec<Vec<f64>> = Vec::with_capacity(road.lanes.len());
    for lane in &road.lanes {
        let n = lane.len();
        let mut a = Vec::with_capacity(n);
        for idx in 0..n {
            let (gap, leader) = lane.gap_and_leader(idx);
            let me = &lane.vehicles[idx];
            let s = Situation {
                gap,
                v_leader: leader.vel,
                lane_length: lane.length,
                lane_count: n,
                t,
            };
            let acc = match (me.class, drivers.ctl) {
                (VehicleClass::Av, Some(ctl)) => {
                    let cmd = drivers.av_command(me, &s, &ctl).map_err(|e| with_context(e, me.id, t))?;
                    report.av = Some((me.id, lane.lane_id, cmd.target, cmd.override_active));
                    cmd.accel
                }
                _ => drivers.accel(me, &s).map_err(|e| with_context(e, me.id, t))?,
            };
            a.push(acc);
        }
        accels.push(a);
    }
    for (lane, acc) in road.lanes.iter_mut().zip(accels) {
        let length = lane.length;
        for (v, a) in lane.vehicles.iter_mut().zip(acc) {
            let v_old = v.vel;
            let v_new = v_old + a * dt;
            if v_new < 0.0 {
                v.vel = 0.0;
                if v_old > 0.0 {
                    report.clamped.push((v.id, lane.lane_id));
                }
            } else {
                v.vel = v_new;
            }
            v.accel = a;
            let x = (v.pos + v_old * dt).rem_euclid(length);
            v.pos = if x >= length { x - length } else { x };
        }
        lane.restore_order();
    }
    road.time = t + dt;
    road.check(drivers.model.l_v)
        .map_err(|e| with_context(e, u32::MAX, road.time))?;
    Ok(report)
}

fn with_context(e: SimError, vid: u32, t: f64) -> SimError {
    match e {
        SimError::Collision(m) if vid == u32::MAX => SimError::Collision(format!("t={t:.2}: {m}")),
        SimError::Collision(m) => SimError::Collision(format!("t={t:.2} vehicle {vid}: {m}")),
        SimError::Domain(m) => SimError::Domain(format!("t={t:.2} vehicle {vid}: {m}")),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    CollisionError,
    DomainError,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Completed => "Completed",
            Termination::CollisionError => "CollisionError",
            Termination::DomainError => "DomainError",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    #[serde(rename = "LC")]
    LaneChange,
    #[serde(rename = "RAMP")]
    Ramp,
    #[serde(rename = "OVERRIDE")]
    Override,
    #[serde(rename = "LC_VARIANCE")]
    LcVariance,
    #[serde(rename = "CLAMP")]
    Clamp,
}

impl EventKind {
    pub fn code(&self) -> &'static str {
        match self {
            EventKind::LaneChange => "LC",
            EventKind::Ramp => "RAMP",
            EventKind::Override => "OVERRIDE",
            EventKind::LcVariance => "LC_VARIANCE",
            EventKind::Clamp => "CLAMP",
        }
    }
}

/// One row of the event log. Lane changes fill all acceleration fields;
/// AV lane changes carry the windowed variance integrals in `note`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub vid: u32,
    pub from_lane: usize,
    pub to_lane: Option<usize>,
    pub a_i: Option<f64>,
    pub a_new: Option<f64>,
    pub a_fol: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub lane: usize,
    pub vid: u32,
    pub class: VehicleClass,
    pub x: f64,
    pub v: f64,
    pub a: f64,
}

/// Per-step, per-lane statistics, flattened step-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LaneSeries {
    pub lanes: usize,
    pub dt: f64,
    variance: Vec<f64>,
    speed: Vec<f64>,
    count: Vec<u32>,
}

impl LaneSeries {
    fn new(lanes: usize, dt: f64, capacity: usize) -> Self {
        Self {
            lanes,
            dt,
            variance: Vec::with_capacity(capacity * lanes),
            speed: Vec::with_capacity(capacity * lanes),
            count: Vec::with_capacity(capacity * lanes),
        }
    }

    /// Appends the statistics of `road` and returns the per-lane variances.
    fn push(&mut self, road: &RoadState) -> Vec<f64> {
        let vars: Vec<f64> = road.lanes.iter().map(lane_speed_variance).collect();
        for lane in &road.lanes {
            self.speed.push(lane_mean_speed(lane).unwrap_or(0.0));
            self.count.push(lane.len() as u32);
        }
        self.variance.extend_from_slice(&vars);
        vars
    }

    /// Number of recorded instants (initial state included).
    pub fn samples(&self) -> usize {
        if self.lanes == 0 {
            0
        } else {
            self.variance.len() / self.lanes
        }
    }

    pub fn variance(&self, k: usize, lane: usize) -> f64 {
        self.variance[k * self.lanes + lane]
    }

    pub fn mean_speed(&self, k: usize, lane: usize) -> f64 {
        self.speed[k * self.lanes + lane]
    }

    pub fn count(&self, k: usize, lane: usize) -> usize {
        self.count[k * self.lanes + lane] as usize
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: Termination,
    /// Diagnostics for a failed run.
    pub message: Option<String>,
    pub seed: u64,
    pub steps_completed: u64,
    pub final_state: RoadState,
    pub trajectory: Vec<TrajectoryRecord>,
    pub events: Vec<Event>,
    pub series: LaneSeries,
    pub metrics: RunMetrics,
}

impl RunResult {
    pub fn lane_change_count(&self) -> u64 {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::LaneChange | EventKind::LcVariance))
            .count() as u64
    }

    pub fn av_lane_change_count(&self) -> u64 {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::LcVariance)
            .count() as u64
    }
}

fn record(road: &RoadState, out: &mut Vec<TrajectoryRecord>) {
    for lane in &road.lanes {
        for v in &lane.vehicles {
            out.push(TrajectoryRecord {
                t: road.time,
                lane: lane.lane_id,
                vid: v.id,
                class: v.class,
                x: v.pos,
                v: v.vel,
                a: v.accel,
            });
        }
    }
}

fn find_av(road: &RoadState) -> Option<u32> {
    road.lanes
        .iter()
        .flat_map(|l| &l.vehicles)
        .find(|v| v.class == VehicleClass::Av)
        .map(|v| v.id)
}

/// Runs one simulation to `t_f` or the first failure.
pub fn run(cfg: &SimConfig) -> Result<RunResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut road = init_state(cfg, &mut rng)?;
    let drivers = DriverModels::new(
        cfg.model,
        cfg.idm_enabled.then_some(cfg.idm),
        cfg.av_enabled.then_some(cfg.ctl),
    );
    let total = cfg.total_steps();
    let total_vehicles = road.vehicle_count();
    let av_id = find_av(&road);
    let stride = cfg.sample_stride as u64;
    let iter_lc = cfg.lc.iter_lc as u64;

    let mut series = LaneSeries::new(cfg.lanes(), cfg.dt, total as usize + 1);
    let mut window = VarianceWindow::new(cfg.lanes(), cfg.dt, cfg.ctl.t1);
    let mut trajectory = Vec::new();
    let mut events = Vec::new();

    let vars = series.push(&road);
    window.push(0, vars);
    if stride > 0 {
        record(&road, &mut trajectory);
    }
    if let Some(id) = av_id {
        events.push(Event {
            t: 0.0,
            kind: EventKind::Ramp,
            vid: id,
            from_lane: cfg.av_lane,
            to_lane: None,
            a_i: None,
            a_new: None,
            a_fol: None,
            note: "start".into(),
        });
    }

    let mut ramp_done = false;
    let mut override_on = false;
    let mut status = Termination::Completed;
    let mut message = None;
    let mut steps_completed = 0;

    for k in 0..total {
        let t = k as f64 * cfg.dt;
        road.time = t;
        if k % iter_lc == 0 {
            match lane_change_step(&mut road, cfg, &drivers, &window, av_id, total_vehicles) {
                Ok(mut ev) => events.append(&mut ev),
                Err(e) => {
                    (status, message) = classify(e);
                    break;
                }
            }
        }
        let report = match step(&mut road, &drivers, cfg.dt) {
            Ok(r) => r,
            Err(e) => {
                (status, message) = classify(e);
                break;
            }
        };
        road.time = (k + 1) as f64 * cfg.dt;
        steps_completed = k + 1;

        for (vid, lane) in report.clamped {
            events.push(Event {
                t,
                kind: EventKind::Clamp,
                vid,
                from_lane: lane,
                to_lane: None,
                a_i: None,
                a_new: None,
                a_fol: None,
                note: String::new(),
            });
        }
        if let Some((vid, lane, target, active)) = report.av {
            if !ramp_done && t >= cfg.ctl.t_tr {
                ramp_done = true;
                events.push(Event {
                    t,
                    kind: EventKind::Ramp,
                    vid,
                    from_lane: lane,
                    to_lane: None,
                    a_i: None,
                    a_new: None,
                    a_fol: None,
                    note: format!("end target={target}"),
                });
            }
            if active != override_on {
                override_on = active;
                events.push(Event {
                    t,
                    kind: EventKind::Override,
                    vid,
                    from_lane: lane,
                    to_lane: None,
                    a_i: None,
                    a_new: None,
                    a_fol: None,
                    note: if active { "on" } else { "off" }.into(),
                });
            }
        }

        let vars = series.push(&road);
        window.push(k + 1, vars);
        if stride > 0 && (k + 1) % stride == 0 {
            record(&road, &mut trajectory);
        }
    }

    let mut result = RunResult {
        status,
        message,
        seed: cfg.seed,
        steps_completed,
        final_state: road,
        trajectory,
        events,
        series,
        metrics: RunMetrics {
            valid: false,
            window: cfg.metrics_window,
            mean_last_window_variance: 0.0,
            lane_variance_last_window: vec![],
            mean_speed: 0.0,
            mean_speed_per_lane: vec![],
            total_lane_changes: 0,
            av_lane_changes: 0,
            series_interval: 0.0,
            variance_series: vec![],
        },
    };
    result.metrics = aggregate_run(&result, cfg.metrics_window);
    Ok(result)
}

fn classify(e: SimError) -> (Termination, Option<String>) {
    let status = match e {
        SimError::Collision(_) | SimError::RejectedInsertion { .. } => Termination::CollisionError,
        _ => Termination::DomainError,
    };
    (status, Some(e.to_string()))
}

/// Uncapped own prediction and braking margins behind a lane change.
fn safety_note(h: &Hypothetical) -> String {
    let behind = h.margin_behind.map(|m| m.to_string()).unwrap_or_default();
    format!("s_new={} m_ahead={} m_behind={behind}", h.s_self_new, h.margin_ahead)
}

/// Human lane-change pass followed by the AV lateral decision.
fn lane_change_step(
    road: &mut RoadState,
    cfg: &SimConfig,
    drivers: &DriverModels,
    window: &VarianceWindow,
    av_id: Option<u32>,
    total_vehicles: usize,
) -> Result<Vec<Event>> {
    let t = road.time;
    let mut events: Vec<Event> = lane_change_pass(road, &cfg.lc, drivers)?
        .into_iter()
        .map(|d| Event {
            t,
            kind: EventKind::LaneChange,
            vid: d.vid,
            from_lane: d.from,
            to_lane: Some(d.to),
            a_i: Some(d.prediction.a_self_now),
            a_new: Some(d.prediction.a_self_new),
            a_fol: d.prediction.s_follower,
            note: safety_note(&d.prediction),
        })
        .collect();
    if let Some(id) = av_id {
        if let Some(d) = av_lateral_decide(road, id, window, &cfg.ctl, &cfg.lc, drivers, t) {
            road.move_vehicle(id, d.from, d.to, cfg.model.l_v)?;
            events.push(Event {
                t,
                kind: EventKind::LcVariance,
                vid: id,
                from_lane: d.from,
                to_lane: Some(d.to),
                a_i: Some(d.prediction.a_self_now),
                a_new: Some(d.prediction.a_self_new),
                a_fol: d.prediction.s_follower,
                note: format!(
                    "own={} target={} {}",
                    d.own_integral,
                    d.target_integral,
                    safety_note(&d.prediction)
                ),
            });
        }
    }
    if road.vehicle_count() != total_vehicles {
        return Err(SimError::Domain(format!(
            "vehicle count changed from {total_vehicles} to {}",
            road.vehicle_count()
        )));
    }
    Ok(events)
}
