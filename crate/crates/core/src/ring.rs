//! Circular lanes, modular geometry and neighbor queries.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VehicleClass {
    Human,
    #[serde(rename = "AV")]
    Av,
    Collaborative,
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VehicleClass::Human => "Human",
            VehicleClass::Av => "AV",
            VehicleClass::Collaborative => "Collaborative",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u32,
    pub pos: f64,
    pub vel: f64,
    pub class: VehicleClass,
    pub alpha: f64,
    pub beta: f64,
    /// Clock value of the last lane change, `-inf` if none.
    pub last_lc_time: f64,
    pub lc_count: u32,
    /// Acceleration applied during the last step.
    pub accel: f64,
}

impl VehicleState {
    pub fn new(id: u32, pos: f64, vel: f64, alpha: f64, beta: f64) -> Self {
        Self {
            id,
            pos,
            vel,
            class: VehicleClass::Human,
            alpha,
            beta,
            last_lc_time: f64::NEG_INFINITY,
            lc_count: 0,
            accel: 0.0,
        }
    }
}

/// Forward distance from `from` to `to` on a ring of circumference `length`.
pub fn ring_distance(from: f64, to: f64, length: f64) -> f64 {
    (to - from).rem_euclid(length)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneState {
    pub lane_id: usize,
    pub length: f64,
    /// Sorted ascending by position.
    pub vehicles: Vec<VehicleState>,
}

impl LaneState {
    pub fn new(lane_id: usize, length: f64) -> Self {
        Self {
            lane_id,
            length,
            vehicles: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    /// Front-to-front gap of vehicle `idx` and its leader. A lone vehicle
    /// leads itself at distance `length`.
    pub fn gap_and_leader(&self, idx: usize) -> (f64, &VehicleState) {
        let n = self.vehicles.len();
        if n == 1 {
            return (self.length, &self.vehicles[0]);
        }
        let me = &self.vehicles[idx];
        let leader = &self.vehicles[(idx + 1) % n];
        let gap = if idx + 1 == n {
            leader.pos + self.length - me.pos
        } else {
            leader.pos - me.pos
        };
        (gap, leader)
    }

    /// Leader and follower of a vehicle that would be placed at `pos`.
    pub fn neighbors(&self, pos: f64) -> Result<(Option<&VehicleState>, Option<&VehicleState>)> {
        let n = self.vehicles.len();
        if n == 0 {
            return Ok((None, None));
        }
        let upper = self.vehicles.partition_point(|v| v.pos <= pos);
        if upper > 0 && self.vehicles[upper - 1].pos == pos {
            return Err(SimError::OccupiedSlot {
                lane: self.lane_id,
                pos,
            });
        }
        let leader = &self.vehicles[upper % n];
        let follower = &self.vehicles[(upper + n - 1) % n];
        Ok((Some(leader), Some(follower)))
    }

    pub fn index_of(&self, vid: u32) -> Option<usize> {
        self.vehicles.iter().position(|v| v.id == vid)
    }

    /// Restores ascending order after positions wrapped past the origin.
    /// Vehicles never overtake within a lane, so wrapped vehicles form a
    /// suffix of the vector.
    pub(crate) fn restore_order(&mut self) {
        let n = self.vehicles.len();
        if n < 2 {
            return;
        }
        let mut i = n - 1;
        while i > 0 && self.vehicles[i - 1].pos <= self.vehicles[i].pos {
            i -= 1;
        }
        if i > 0 {
            self.vehicles.rotate_left(i);
        }
    }

    /// Checks ordering, ring bounds and the minimum gap `l_v`.
    pub fn check(&self, l_v: f64) -> Result<()> {
        let n = self.vehicles.len();
        for (i, v) in self.vehicles.iter().enumerate() {
            if !(v.pos >= 0.0 && v.pos < self.length) {
                return Err(SimError::Domain(format!(
                    "vehicle {} at {} outside lane {} of length {}",
                    v.id, v.pos, self.lane_id, self.length
                )));
            }
            if i > 0 && !(self.vehicles[i - 1].pos < v.pos) {
                return Err(SimError::Collision(format!(
                    "vehicles {} and {} out of order in lane {}",
                    self.vehicles[i - 1].id,
                    v.id,
                    self.lane_id
                )));
            }
        }
        if n >= 2 {
            for i in 0..n {
                let (gap, leader) = self.gap_and_leader(i);
                if !(gap > l_v) {
                    return Err(SimError::Collision(format!(
                        "vehicle {} is {gap:.6} m behind vehicle {} in lane {}",
                        self.vehicles[i].id, leader.id, self.lane_id
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadState {
    pub lanes: Vec<LaneState>,
    pub time: f64,
}

impl RoadState {
    pub fn vehicle_count(&self) -> usize {
        self.lanes.iter().map(LaneState::len).sum()
    }

    pub fn locate(&self, vid: u32) -> Option<(usize, usize)> {
        self.lanes
            .iter()
            .enumerate()
            .find_map(|(l, lane)| lane.index_of(vid).map(|i| (l, i)))
    }

    pub fn vehicle(&self, vid: u32) -> Option<&VehicleState> {
        self.locate(vid).map(|(l, i)| &self.lanes[l].vehicles[i])
    }

    /// Adjacent lanes of `lane` in ascending order.
    pub fn adjacent_lanes(&self, lane: usize) -> impl Iterator<Item = usize> {
        let j = self.lanes.len();
        [lane.checked_sub(1), (lane + 1 < j).then_some(lane + 1)]
            .into_iter()
            .flatten()
    }

    pub fn check(&self, l_v: f64) -> Result<()> {
        self.lanes.iter().try_for_each(|l| l.check(l_v))
    }

    /// Position a vehicle at `pos` in lane `from` maps to in lane `to`.
    pub fn map_position(&self, pos: f64, from: usize, to: usize) -> f64 {
        let (lf, lt) = (self.lanes[from].length, self.lanes[to].length);
        if lf == lt {
            return pos;
        }
        let mapped = pos * (lt / lf);
        if mapped >= lt {
            mapped - lt
        } else {
            mapped
        }
    }

    /// Moves a vehicle to an adjacent lane at its mapped position and stamps
    /// the lane-change bookkeeping with the current clock.
    pub fn move_vehicle(&mut self, vid: u32, from: usize, to: usize, l_v: f64) -> Result<()> {
        if to >= self.lanes.len() || from.abs_diff(to) != 1 {
            return Err(SimError::Input(format!(
                "lanes {from} and {to} are not adjacent"
            )));
        }
        let idx = self.lanes[from]
            .index_of(vid)
            .ok_or(SimError::UnknownVehicle(vid))?;
        let pos = self.map_position(self.lanes[from].vehicles[idx].pos, from, to);
        let target = &self.lanes[to];
        let reject = |reason: String| SimError::RejectedInsertion {
            vid,
            lane: to,
            reason,
        };
        if !target.is_empty() {
            let (leader, follower) = target
                .neighbors(pos)
                .map_err(|e| reject(e.to_string()))?;
            let (leader, follower) = (leader.unwrap(), follower.unwrap());
            let ahead = ring_distance(pos, leader.pos, target.length);
            let behind = ring_distance(follower.pos, pos, target.length);
            if !(ahead > l_v) || !(behind > l_v) {
                return Err(reject(format!(
                    "gap ahead {ahead:.4} m / behind {behind:.4} m does not exceed {l_v} m"
                )));
            }
        }
        let mut v = self.lanes[from].vehicles.remove(idx);
        v.pos = pos;
        v.last_lc_time = self.time;
        v.lc_count += 1;
        let target = &mut self.lanes[to];
        let at = target.vehicles.partition_point(|o| o.pos < pos);
        target.vehicles.insert(at, v);
        Ok(())
    }
}
