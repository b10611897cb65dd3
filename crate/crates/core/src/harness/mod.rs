//! Seeded experiment batches: (Δ_I, Δ_s) sweeps, collaborative-share curves
//! and SVG heatmaps.
//!
//! Jobs run on a dedicated rayon pool and are merged back in key order, so
//! the worker count never changes an output byte.

mod collab;
mod heatmap;
mod sweep;

pub use collab::{run_collab, CollabRow, CollabSpec, COLLAB_HEADER};
pub use heatmap::{render_heatmap, Metric};
pub use sweep::{
    read_sweep_table, run_sweep, write_sweep_outputs, Preset, RunRow, SweepRow, SweepSpec, SweepTable,
    RUN_HEADER, SWEEP_HEADER,
};

use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SimError};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one replicate in one grid cell. Independent of grid size, so a
/// cell can be re-run on its own.
pub fn cell_seed(base: u64, i_idx: usize, s_idx: usize, replicate: usize) -> u64 {
    [i_idx as u64, s_idx as u64, replicate as u64]
        .into_iter()
        .fold(splitmix64(base), |h, k| splitmix64(h ^ k))
}

/// Evenly spaced parameter values, written `MIN:MAX:STEPS`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        let a = Self { min, max, steps };
        if steps == 0 || !min.is_finite() || !max.is_finite() || max < min {
            return Err(SimError::Input(format!("invalid axis {a}")));
        }
        Ok(a)
    }

    /// Grid values; a single step yields `min`.
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| if k + 1 == self.steps { self.max } else { self.min + k as f64 * h })
            .collect()
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.steps)
    }
}

impl FromStr for Axis {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || SimError::Input(format!("expected MIN:MAX:STEPS, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(bad());
        };
        Axis::new(
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
            n.trim().parse().map_err(|_| bad())?,
        )
    }
}

/// Maps `f` over `jobs` on a pool of `threads` workers (all cores when
/// `None`), returning results in input order.
pub(crate) fn parallel_map<J, R, F>(jobs: &[J], threads: Option<usize>, f: F) -> Result<Vec<R>>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> R + Sync + Send,
{
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    let pool = b
        .build()
        .map_err(|e| SimError::Input(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(&f).collect()))
}
