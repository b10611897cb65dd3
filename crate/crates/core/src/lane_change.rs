//! MOBIL-style lane changing: acceleration incentive, induced-braking safety
//! and a per-vehicle cooldown, applied sequentially at a fixed cadence.

use serde::{Deserialize, Serialize};

use crate::drivers::{DriverModels, Situation};
use crate::error::{Result, SimError};
use crate::ring::{ring_distance, RoadState, VehicleClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaneChangeParams {
    /// Incentive threshold [m/s²].
    pub delta_i: f64,
    /// Safety threshold [m/s²].
    pub delta_s: f64,
    /// Cooldown between two changes of the same vehicle [s].
    pub tau: f64,
    /// Decision cadence in timesteps.
    pub iter_lc: u32,
    /// Bumper clearance a slot must keep beyond the braking distance [m].
    pub min_clearance: f64,
}

impl Default for LaneChangeParams {
    fn default() -> Self {
        Self {
            delta_i: 3.0,
            delta_s: 0.5,
            tau: 5.0,
            iter_lc: 50,
            min_clearance: 0.5,
        }
    }
}

impl LaneChangeParams {
    pub fn validate(&self) -> Result<()> {
        if self.delta_i > 0.0
            && self.delta_s > 0.0
            && self.tau >= 0.0
            && self.iter_lc >= 1
            && self.min_clearance >= 0.0
        {
            Ok(())
        } else {
            Err(SimError::config(
                "lane change parameters need delta_i > 0, delta_s > 0, tau >= 0, iter_lc >= 1, min_clearance >= 0",
            ))
        }
    }
}

/// Predicted accelerations for a prospective move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hypothetical {
    /// Own capped acceleration staying in the current lane.
    pub a_self_now: f64,
    /// Own capped acceleration behind the target-lane leader.
    pub a_self_new: f64,
    /// Uncapped car-following acceleration behind the target-lane leader.
    pub s_self_new: f64,
    /// Uncapped acceleration of the target-lane follower behind the mover;
    /// `None` when the target lane is empty.
    pub s_follower: Option<f64>,
    /// Bumper gap to the new leader minus the braking distance needed to
    /// match its speed at full deceleration [m].
    pub margin_ahead: f64,
    /// Same for the new follower behind the mover.
    pub margin_behind: Option<f64>,
}

impl Hypothetical {
    /// Both induced accelerations stay above `-delta_s` and both margins
    /// keep `min_clearance`.
    pub fn is_safe(&self, p: &LaneChangeParams) -> bool {
        self.s_self_new > -p.delta_s
            && self.s_follower.map_or(true, |a| a > -p.delta_s)
            && self.margin_ahead > p.min_clearance
            && self.margin_behind.map_or(true, |m| m > p.min_clearance)
    }
}

/// Bumper gap left after a follower at `v_f` brakes to `v_l` at rate `b`.
fn braking_margin(net_gap: f64, v_f: f64, v_l: f64, b: f64) -> f64 {
    net_gap - (v_f * v_f - v_l * v_l).max(0.0) / (2.0 * b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LcDecision {
    pub vid: u32,
    pub from: usize,
    pub to: usize,
    pub prediction: Hypothetical,
}

/// Evaluates the frozen state for vehicle `vid` moving into `target`.
pub fn hypothetical_accels(
    road: &RoadState,
    vid: u32,
    target: usize,
    drivers: &DriverModels,
    t: f64,
) -> Result<Hypothetical> {
    let l_v = drivers.model.l_v;
    let (lane, idx) = road.locate(vid).ok_or(SimError::UnknownVehicle(vid))?;
    let here = &road.lanes[lane];
    let me = &here.vehicles[idx];
    let (gap, leader) = here.gap_and_leader(idx);
    let a_self_now = drivers.accel(
        me,
        &Situation {
            gap,
            v_leader: leader.vel,
            lane_length: here.length,
            lane_count: here.len(),
            t,
        },
    )?;

    let there = &road.lanes[target];
    let pos = road.map_position(me.pos, lane, target);
    let occupied = SimError::OccupiedSlot { lane: target, pos };
    let (ahead, v_ahead, follower, count) = match there.neighbors(pos)? {
        (Some(leader), Some(follower)) => {
            let ahead = ring_distance(pos, leader.pos, there.length);
            let behind = ring_distance(follower.pos, pos, there.length);
            if !(ahead > l_v) || !(behind > l_v) {
                return Err(occupied);
            }
            (ahead, leader.vel, Some((follower, behind)), there.len() + 1)
        }
        // alone in the lane: the mover follows itself around the ring
        _ => (there.length, me.vel, None, 1),
    };
    let mine = Situation {
        gap: ahead,
        v_leader: v_ahead,
        lane_length: there.length,
        lane_count: count,
        t,
    };
    let a_self_new = drivers.accel(me, &mine)?;
    let s_self_new = drivers.safety_accel(me, &mine)?;
    let b = drivers.model.a_cap_min;
    let margin_ahead = braking_margin(ahead - l_v, me.vel, v_ahead, b);
    let (s_follower, margin_behind) = match follower {
        Some((f, behind)) => {
            let a = drivers.safety_accel(
                f,
                &Situation {
                    gap: behind,
                    v_leader: me.vel,
                    lane_length: there.length,
                    lane_count: count,
                    t,
                },
            )?;
            (Some(a), Some(braking_margin(behind - l_v, f.vel, me.vel, b)))
        }
        None => (None, None),
    };
    Ok(Hypothetical {
        a_self_now,
        a_self_new,
        s_self_new,
        s_follower,
        margin_ahead,
        margin_behind,
    })
}

/// Incentive, safety and cooldown test for a human or collaborative driver.
/// Of two qualifying lanes the one with the larger predicted acceleration
/// wins; ties go to the lower lane index.
pub fn mobil_decide(
    road: &RoadState,
    vid: u32,
    params: &LaneChangeParams,
    drivers: &DriverModels,
    t: f64,
) -> Option<LcDecision> {
    let (lane, idx) = road.locate(vid)?;
    let v = &road.lanes[lane].vehicles[idx];
    if v.class == VehicleClass::Av || !(t > v.last_lc_time + params.tau) {
        return None;
    }
    let mut best: Option<LcDecision> = None;
    for to in road.adjacent_lanes(lane) {
        let Ok(h) = hypothetical_accels(road, vid, to, drivers, t) else {
            continue;
        };
        let incentive = h.a_self_new > h.a_self_now + params.delta_i;
        if incentive && h.is_safe(params) && best.map_or(true, |b| h.a_self_new > b.prediction.a_self_new) {
            best = Some(LcDecision {
                vid,
                from: lane,
                to,
                prediction: h,
            });
        }
    }
    best
}

/// One sequential decision pass at clock `road.time`. Candidates are visited
/// in ascending (lane, id) order of the state at pass start; each accepted
/// change is applied before the next candidate is evaluated.
pub fn lane_change_pass(
    road: &mut RoadState,
    params: &LaneChangeParams,
    drivers: &DriverModels,
) -> Result<Vec<LcDecision>> {
    let t = road.time;
    let mut order: Vec<(usize, u32)> = road
        .lanes
        .iter()
        .enumerate()
        .flat_map(|(l, lane)| {
            lane.vehicles
                .iter()
                .filter(|v| v.class != VehicleClass::Av)
                .map(move |v| (l, v.id))
        })
        .collect();
    order.sort_unstable();
    let mut events = Vec::new();
    for (_, vid) in order {
        if let Some(d) = mobil_decide(road, vid, params, drivers, t) {
            road.move_vehicle(d.vid, d.from, d.to, drivers.model.l_v)?;
            events.push(d);
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{equilibrium_speed, ModelParams};
    use crate::ring::{LaneState, VehicleState};

    fn drivers() -> DriverModels {
        DriverModels::new(ModelParams::default(), None, None)
    }

    fn uniform_lane(lane_id: usize, n: u32, length: f64, offset: f64, id0: u32) -> LaneState {
        let m = ModelParams::default();
        let h = length / n as f64;
        let v = equilibrium_speed(h, &m).unwrap();
        let mut lane = LaneState::new(lane_id, length);
        for i in 0..n {
            lane.vehicles
                .push(VehicleState::new(id0 + i, offset + i as f64 * h, v, m.alpha, m.beta));
        }
        lane
    }

    #[test]
    fn uniform_equilibrium_slot_gives_zero_predictions() {
        let mut target = uniform_lane(1, 24, 240.0, 0.0, 100);
        target.vehicles.retain(|v| v.pos != 30.0);
        let road = RoadState {
            lanes: vec![uniform_lane(0, 24, 240.0, 0.0, 0), target],
            time: 0.0,
        };
        let h = hypothetical_accels(&road, 3, 1, &drivers(), 0.0).unwrap();
        assert_eq!(h.a_self_now, 0.0);
        assert_eq!(h.a_self_new, 0.0);
        assert_eq!(h.s_follower, Some(0.0));
        assert!((h.margin_ahead - 5.5).abs() < 1e-12);
    }

    #[test]
    fn coinciding_slot_is_occupied() {
        let road = RoadState {
            lanes: vec![uniform_lane(0, 24, 240.0, 0.0, 0), uniform_lane(1, 24, 240.0, 0.0, 100)],
            time: 0.0,
        };
        assert!(matches!(
            hypothetical_accels(&road, 3, 1, &drivers(), 0.0),
            Err(SimError::OccupiedSlot { .. })
        ));
        let tight = RoadState {
            lanes: vec![uniform_lane(0, 24, 240.0, 0.0, 0), uniform_lane(1, 24, 240.0, 2.0, 100)],
            time: 0.0,
        };
        assert!(matches!(
            hypothetical_accels(&tight, 3, 1, &drivers(), 0.0),
            Err(SimError::OccupiedSlot { .. })
        ));
        assert!(mobil_decide(&tight, 3, &LaneChangeParams::default(), &drivers(), 1.0).is_none());
    }

    #[test]
    fn empty_target_lane_uses_self_leader() {
        let road = RoadState {
            lanes: vec![uniform_lane(0, 24, 240.0, 0.0, 0), LaneState::new(1, 240.0)],
            time: 0.0,
        };
        let h = hypothetical_accels(&road, 0, 1, &drivers(), 0.0).unwrap();
        assert!(h.s_follower.is_none() && h.margin_behind.is_none());
        let m = ModelParams::default();
        let expect = m.alpha
            * (crate::dynamics::optimal_velocity(240.0, &m) - equilibrium_speed(10.0, &m).unwrap());
        assert!((h.a_self_new - expect).abs() < 1e-12);
        let p = LaneChangeParams {
            delta_i: 0.6,
            ..Default::default()
        };
        let d = mobil_decide(&road, 0, &p, &drivers(), 1.0).unwrap();
        assert_eq!((d.from, d.to), (0, 1));
    }

    #[test]
    fn no_gain_no_change() {
        let road = RoadState {
            lanes: vec![uniform_lane(0, 24, 240.0, 0.0, 0), uniform_lane(1, 24, 240.0, 5.0, 100)],
            time: 0.0,
        };
        let p = LaneChangeParams::default();
        let mut r = road.clone();
        let ev = lane_change_pass(&mut r, &p, &drivers()).unwrap();
        assert!(ev.is_empty());
        assert_eq!(r, road);
    }

    fn slow_lane_next_to_empty() -> RoadState {
        // lane 0: one vehicle closing fast on a stopped leader; lane 1 empty
        let m = ModelParams::default();
        let mut lane = LaneState::new(0, 240.0);
        lane.vehicles.push(VehicleState::new(0, 0.0, 6.0, m.alpha, m.beta));
        lane.vehicles.push(VehicleState::new(1, 8.0, 0.0, m.alpha, m.beta));
        RoadState {
            lanes: vec![lane, LaneState::new(1, 240.0)],
            time: 0.0,
        }
    }

    #[test]
    fn single_qualifying_vehicle_changes_once() {
        let mut road = slow_lane_next_to_empty();
        road.time = 1.0;
        let ev = lane_change_pass(&mut road, &LaneChangeParams::default(), &drivers()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].vid, 0);
        assert_eq!(road.lanes[0].len(), 1);
        assert_eq!(road.lanes[1].len(), 1);
        assert_eq!(road.vehicle(0).unwrap().last_lc_time, 1.0);
    }

    #[test]
    fn cooldown_boundary_is_strict() {
        let mut road = slow_lane_next_to_empty();
        road.lanes[0].vehicles[0].last_lc_time = 0.0;
        let p = LaneChangeParams::default();
        assert!(mobil_decide(&road, 0, &p, &drivers(), p.tau).is_none());
        assert!(mobil_decide(&road, 0, &p, &drivers(), p.tau + 0.02).is_some());
    }

    #[test]
    fn safety_veto() {
        // target lane follower right behind the slot and faster than the mover
        let mut road = slow_lane_next_to_empty();
        let m = ModelParams::default();
        road.lanes[1]
            .vehicles
            .push(VehicleState::new(7, 230.0, 9.0, m.alpha, m.beta));
        let h = hypothetical_accels(&road, 0, 1, &drivers(), 1.0).unwrap();
        assert!(h.s_follower.unwrap() <= -0.5);
        let p = LaneChangeParams {
            delta_i: 0.1,
            delta_s: 0.5,
            ..Default::default()
        };
        assert!(mobil_decide(&road, 0, &p, &drivers(), 1.0).is_none());
    }

    fn with_follower(pos: f64, vel: f64) -> RoadState {
        let mut road = slow_lane_next_to_empty();
        let m = ModelParams::default();
        road.lanes[1]
            .vehicles
            .push(VehicleState::new(7, pos, vel, m.alpha, m.beta));
        road
    }

    #[test]
    fn braking_margin_veto() {
        // 5.5 m bumper gap, follower needs (81 - 36) / 8 = 5.625 m to slow to 6 m/s
        let road = with_follower(230.0, 9.0);
        let h = hypothetical_accels(&road, 0, 1, &drivers(), 1.0).unwrap();
        assert!((h.margin_behind.unwrap() - (5.5 - 45.0 / 8.0)).abs() < 1e-12);
        assert!(h.s_follower.unwrap() > -5.0);
        let p = LaneChangeParams {
            delta_s: 5.0,
            ..Default::default()
        };
        assert!(!h.is_safe(&p));
        assert!(mobil_decide(&road, 0, &p, &drivers(), 1.0).is_none());
        let lax = LaneChangeParams {
            min_clearance: -1.0,
            ..p
        };
        assert!(h.is_safe(&lax));
    }

    #[test]
    fn safety_sees_braking_beyond_the_cap() {
        let road = with_follower(234.0, 6.5);
        let h = hypothetical_accels(&road, 0, 1, &drivers(), 1.0).unwrap();
        let m = ModelParams::default();
        assert!(h.margin_behind.unwrap() > 0.5);
        assert!(h.s_follower.unwrap() < -m.a_cap_min - 0.5);
        let p = LaneChangeParams {
            delta_s: m.a_cap_min + 0.5,
            ..Default::default()
        };
        assert!(!h.is_safe(&p));
        assert!(mobil_decide(&road, 0, &p, &drivers(), 1.0).is_none());
    }

    #[test]
    fn av_is_not_a_mobil_candidate() {
        let mut road = slow_lane_next_to_empty();
        road.lanes[0].vehicles[0].class = VehicleClass::Av;
        let d = DriverModels::new(ModelParams::default(), None, Some(Default::default()));
        assert!(mobil_decide(&road, 0, &LaneChangeParams::default(), &d, 1.0).is_none());
    }
}
