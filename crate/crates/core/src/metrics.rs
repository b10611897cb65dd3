//! Spatial speed statistics and run/batch aggregation.

use serde::{Deserialize, Serialize};

use crate::engine::{LaneSeries, RunResult, Termination};
use crate::error::{Result, SimError};
use crate::ring::LaneState;

/// Population variance of the speeds in a lane; 0 for an empty lane.
pub fn lane_speed_variance(lane: &LaneState) -> f64 {
    let n = lane.len();
    if n == 0 {
        return 0.0;
    }
    let mean = lane.vehicles.iter().map(|v| v.vel).sum::<f64>() / n as f64;
    lane.vehicles
        .iter()
        .map(|v| (v.vel - mean) * (v.vel - mean))
        .sum::<f64>()
        / n as f64
}

pub fn lane_mean_speed(lane: &LaneState) -> Option<f64> {
    if lane.is_empty() {
        None
    } else {
        Some(lane.vehicles.iter().map(|v| v.vel).sum::<f64>() / lane.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// False for runs that did not reach `t_f`.
    pub valid: bool,
    pub window: f64,
    /// Time average over the window of the per-lane variance, then the mean
    /// across lanes [m²/s²].
    pub mean_last_window_variance: f64,
    pub lane_variance_last_window: Vec<f64>,
    /// Vehicle-averaged speed over the window [m/s].
    pub mean_speed: f64,
    pub mean_speed_per_lane: Vec<f64>,
    pub total_lane_changes: u64,
    pub av_lane_changes: u64,
    /// Per-lane variance sampled every `series_interval` seconds.
    pub series_interval: f64,
    pub variance_series: Vec<Vec<f64>>,
}

/// Number of trailing samples covering `window` seconds.
fn window_samples(series: &LaneSeries, window: f64) -> usize {
    let w = (window / series.dt).round() as usize;
    w.clamp(1, series.samples())
}

pub fn aggregate_run(result: &RunResult, window: f64) -> RunMetrics {
    let s = &result.series;
    let lanes = s.lanes;
    let total = s.samples();
    let w = window_samples(s, window);
    let start = total - w;

    let mut lane_var = vec![0.0; lanes];
    let mut lane_speed = vec![0.0; lanes];
    let mut lane_speed_n = vec![0usize; lanes];
    let mut sys_speed = 0.0;
    for k in start..total {
        let mut sum = 0.0;
        let mut count = 0usize;
        for l in 0..lanes {
            lane_var[l] += s.variance(k, l);
            let c = s.count(k, l);
            if c > 0 {
                lane_speed[l] += s.mean_speed(k, l);
                lane_speed_n[l] += 1;
                sum += s.mean_speed(k, l) * c as f64;
                count += c;
            }
        }
        if count > 0 {
            sys_speed += sum / count as f64;
        }
    }
    for l in 0..lanes {
        lane_var[l] /= w as f64;
        if lane_speed_n[l] > 0 {
            lane_speed[l] /= lane_speed_n[l] as f64;
        }
    }
    let mean_var = lane_var.iter().sum::<f64>() / lanes as f64;

    let stride = ((1.0 / s.dt).round() as usize).max(1);
    let variance_series = (0..lanes)
        .map(|l| (0..total).step_by(stride).map(|k| s.variance(k, l)).collect())
        .collect();

    RunMetrics {
        valid: result.status == Termination::Completed,
        window,
        mean_last_window_variance: mean_var,
        lane_variance_last_window: lane_var,
        mean_speed: sys_speed / w as f64,
        mean_speed_per_lane: lane_speed,
        total_lane_changes: result.lane_change_count(),
        av_lane_changes: result.av_lane_change_count(),
        series_interval: stride as f64 * s.dt,
        variance_series,
    }
}

/// Mean and sample standard deviation of one scalar across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Sorted reduction, so the result does not depend on input order.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        if v.len() < 2 {
            return Self { mean, std: 0.0 };
        }
        let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        dev.sort_by(f64::total_cmp);
        Self {
            mean,
            std: (dev.iter().sum::<f64>() / (n - 1.0)).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMetrics {
    pub seeds: usize,
    pub variance: Summary,
    pub mean_speed: Summary,
    pub lane_changes: Summary,
}

/// Aggregates the valid runs of one configuration cell.
pub fn aggregate_batch(runs: &[RunMetrics]) -> Result<BatchMetrics> {
    let valid: Vec<&RunMetrics> = runs.iter().filter(|r| r.valid).collect();
    if valid.is_empty() {
        return Err(SimError::Input("no valid runs to aggregate".into()));
    }
    let col = |f: fn(&RunMetrics) -> f64| -> Vec<f64> { valid.iter().map(|r| f(r)).collect() };
    Ok(BatchMetrics {
        seeds: valid.len(),
        variance: Summary::of(&col(|r| r.mean_last_window_variance)),
        mean_speed: Summary::of(&col(|r| r.mean_speed)),
        lane_changes: Summary::of(&col(|r| r.total_lane_changes as f64)),
    })
}
