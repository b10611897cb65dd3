use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{cell_seed, parallel_map, Axis};
use crate::config::SimConfig;
use crate::engine::run;
use crate::error::{Result, SimError};
use crate::io;
use crate::metrics::{aggregate_batch, RunMetrics};

pub const SWEEP_HEADER: [&str; 8] = [
    "delta_i",
    "delta_s",
    "seeds",
    "mean_var",
    "std_var",
    "mean_speed",
    "mean_lane_changes",
    "failures",
];

pub const RUN_HEADER: [&str; 12] = [
    "delta_i",
    "delta_s",
    "di_index",
    "ds_index",
    "replicate",
    "seed",
    "status",
    "mean_var",
    "mean_speed",
    "lane_changes",
    "av_lane_changes",
    "message",
];

/// Named grid/seed/duration bundles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 5×5 grid, 10 seeds, 600 s.
    Quick,
    /// 13×10 grid, 100 seeds, 1000 s.
    Paper,
}

impl Preset {
    pub fn spec(self, base: SimConfig, av_enabled: bool) -> SweepSpec {
        let (di, ds, seeds, t_f) = match self {
            Preset::Quick => (5, 5, 10, 600.0),
            Preset::Paper => (13, 10, 100, 1000.0),
        };
        SweepSpec {
            delta_i: Axis { min: 0.6, max: 3.0, steps: di },
            delta_s: Axis { min: 0.5, max: 5.0, steps: ds },
            seeds,
            base: SimConfig { t_f, ..base },
            av_enabled,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub delta_i: Axis,
    pub delta_s: Axis,
    /// Replicates per cell.
    pub seeds: usize,
    /// Everything except the swept thresholds, the AV flag and the seed.
    pub base: SimConfig,
    pub av_enabled: bool,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
}

impl SweepSpec {
    /// Configuration of one replicate.
    pub fn cell_config(&self, i_idx: usize, s_idx: usize, replicate: usize) -> SimConfig {
        let mut cfg = self.base.clone();
        cfg.lc.delta_i = self.delta_i.values()[i_idx];
        cfg.lc.delta_s = self.delta_s.values()[s_idx];
        cfg.av_enabled = self.av_enabled;
        cfg.seed = cell_seed(self.base.seed, i_idx, s_idx, replicate);
        cfg.sample_stride = 0;
        cfg
    }
}

/// Aggregate of one (Δ_I, Δ_s) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta_i: f64,
    pub delta_s: f64,
    /// Replicates configured for the cell.
    pub seeds: usize,
    /// Statistics over the completed runs; NaN when none completed.
    pub mean_var: f64,
    pub std_var: f64,
    pub mean_speed: f64,
    pub mean_lane_changes: f64,
    pub failures: usize,
}

/// One replicate, enough to re-run it alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub delta_i: f64,
    pub delta_s: f64,
    pub di_index: usize,
    pub ds_index: usize,
    pub replicate: usize,
    pub seed: u64,
    pub status: String,
    pub mean_var: f64,
    pub mean_speed: f64,
    pub lane_changes: u64,
    pub av_lane_changes: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    /// Δ_I-major, Δ_s-minor order.
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunRow>,
}

impl SweepTable {
    pub fn cell(&self, delta_i: f64, delta_s: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| (r.delta_i - delta_i).abs() < 1e-9 && (r.delta_s - delta_s).abs() < 1e-9)
    }

    pub fn total_failures(&self) -> usize {
        self.rows.iter().map(|r| r.failures).sum()
    }
}

pub(crate) fn batch_row<'a>(runs: impl Iterator<Item = &'a RunMetrics>, seeds: usize) -> (f64, f64, f64, f64, usize) {
    let runs: Vec<RunMetrics> = runs.cloned().collect();
    let failures = seeds - runs.iter().filter(|m| m.valid).count();
    match aggregate_batch(&runs) {
        Ok(b) => (b.variance.mean, b.variance.std, b.mean_speed.mean, b.lane_changes.mean, failures),
        Err(_) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, failures),
    }
}

/// Runs every replicate of every cell and aggregates per cell.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    if spec.seeds == 0 {
        return Err(SimError::Input("a sweep needs at least one seed per cell".into()));
    }
    let (di, ds) = (spec.delta_i.values(), spec.delta_s.values());
    let mut jobs = Vec::with_capacity(di.len() * ds.len() * spec.seeds);
    for i in 0..di.len() {
        for s in 0..ds.len() {
            let cfg = spec.cell_config(i, s, 0);
            cfg.validate()?;
            for r in 0..spec.seeds {
                jobs.push((i, s, r));
            }
        }
    }

    let results = parallel_map(&jobs, spec.jobs, |&(i, s, r)| {
        let cfg = spec.cell_config(i, s, r);
        let (status, message, metrics) = match run(&cfg) {
            Ok(mut res) => {
                res.metrics.variance_series.clear();
                (res.status.to_string(), res.message.unwrap_or_default(), Some(res.metrics))
            }
            Err(e) => ("Error".to_string(), e.to_string(), None),
        };
        let m = metrics.as_ref();
        let row = RunRow {
            delta_i: di[i],
            delta_s: ds[s],
            di_index: i,
            ds_index: s,
            replicate: r,
            seed: cfg.seed,
            status,
            mean_var: m.map_or(f64::NAN, |m| m.mean_last_window_variance),
            mean_speed: m.map_or(f64::NAN, |m| m.mean_speed),
            lane_changes: m.map_or(0, |m| m.total_lane_changes),
            av_lane_changes: m.map_or(0, |m| m.av_lane_changes),
            message,
        };
        (row, metrics)
    })?;

    let mut table = SweepTable::default();
    for (cell, chunk) in results.chunks(spec.seeds).enumerate() {
        let (i, s) = (cell / ds.len(), cell % ds.len());
        let (mean_var, std_var, mean_speed, mean_lane_changes, failures) =
            batch_row(chunk.iter().filter_map(|(_, m)| m.as_ref()), spec.seeds);
        table.rows.push(SweepRow {
            delta_i: di[i],
            delta_s: ds[s],
            seeds: spec.seeds,
            mean_var,
            std_var,
            mean_speed,
            mean_lane_changes,
            failures,
        });
    }
    table.runs = results.into_iter().map(|(row, _)| row).collect();
    Ok(table)
}

/// Writes `sweep.csv` and `runs.csv` into `dir`.
pub fn write_sweep_outputs(table: &SweepTable, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    io::write_csv(dir.join("sweep.csv"), &SWEEP_HEADER, &table.rows)?;
    io::write_csv(dir.join("runs.csv"), &RUN_HEADER, &table.runs)?;
    Ok(())
}

pub fn read_sweep_table(path: impl AsRef<Path>) -> Result<SweepTable> {
    Ok(SweepTable {
        rows: io::read_csv(path)?,
        runs: Vec::new(),
    })
}
