use serde::{Deserialize, Serialize};

use super::sweep::batch_row;
use super::{cell_seed, parallel_map};
use crate::config::SimConfig;
use crate::dynamics::stability_eigen;
use crate::engine::run;
use crate::error::{Result, SimError};

pub const COLLAB_HEADER: [&str; 7] = ["count", "n", "p", "seeds", "mean_var", "std_var", "failures"];

/// Share-of-collaborative-drivers experiment on a single ring.
#[derive(Debug, Clone, PartialEq)]
pub struct CollabSpec {
    /// Collaborative vehicles out of the lane's population.
    pub counts: Vec<usize>,
    pub seeds: usize,
    pub base: SimConfig,
    pub jobs: Option<usize>,
}

impl Default for CollabSpec {
    /// 258 m ring with 25 vehicles, 1000 s, last 100 s averaged.
    fn default() -> Self {
        let mut base = SimConfig::single_lane(258.0, 25);
        base.t_f = 1000.0;
        base.metrics_window = 100.0;
        base.sample_stride = 0;
        Self {
            counts: vec![25, 12, 8, 6, 5, 4, 3, 2, 1, 0],
            seeds: 40,
            base,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollabRow {
    pub count: usize,
    pub n: usize,
    pub p: f64,
    pub seeds: usize,
    pub mean_var: f64,
    pub std_var: f64,
    pub failures: usize,
}

impl CollabSpec {
    fn lane_population(&self) -> Result<usize> {
        match self.base.n_per_lane.as_slice() {
            [n] => Ok(*n),
            _ => Err(SimError::Input("the collaborative experiment uses a single lane".into())),
        }
    }

    pub fn point_config(&self, count: usize, replicate: usize) -> Result<SimConfig> {
        let n = self.lane_population()?;
        let mut cfg = self.base.clone();
        cfg.collab_fraction = count as f64 / n as f64;
        cfg.seed = cell_seed(self.base.seed, count, 0, replicate);
        cfg.sample_stride = 0;
        Ok(cfg)
    }

    /// Human weights must be unstable and collaborative weights stable on
    /// the configured ring.
    fn check_regimes(&self) -> Result<()> {
        let m = &self.base.model;
        let (n, len) = (self.lane_population()?, self.base.lane_lengths[0]);
        let human = stability_eigen(m, n, len)?;
        let collab = stability_eigen(&m.with_weights(self.base.alpha_s, self.base.beta_s), n, len)?;
        if !human.eigen_unstable {
            return Err(SimError::Input(format!(
                "human weights (alpha={}, beta={}) are already stable on this ring",
                m.alpha, m.beta
            )));
        }
        if collab.eigen_unstable {
            return Err(SimError::Input(format!(
                "collaborative weights (alpha_s={}, beta_s={}) are unstable on this ring",
                self.base.alpha_s, self.base.beta_s
            )));
        }
        Ok(())
    }
}

/// One aggregated variance per collaborative share, sorted by share.
pub fn run_collab(spec: &CollabSpec) -> Result<Vec<CollabRow>> {
    let n = spec.lane_population()?;
    if spec.seeds == 0 {
        return Err(SimError::Input("at least one seed per point is required".into()));
    }
    if let Some(&c) = spec.counts.iter().find(|&&c| c > n) {
        return Err(SimError::Input(format!("count {c} exceeds the {n} vehicles on the ring")));
    }
    spec.check_regimes()?;
    let mut counts = spec.counts.clone();
    counts.sort_unstable();
    counts.dedup();
    for &c in &counts {
        spec.point_config(c, 0)?.validate()?;
    }
    let jobs: Vec<(usize, usize)> = counts
        .iter()
        .flat_map(|&c| (0..spec.seeds).map(move |r| (c, r)))
        .collect();
    let results = parallel_map(&jobs, spec.jobs, |&(c, r)| {
        spec.point_config(c, r)
            .and_then(|cfg| run(&cfg))
            .ok()
            .map(|mut res| {
                res.metrics.variance_series.clear();
                res.metrics
            })
    })?;
    Ok(counts
        .iter()
        .zip(results.chunks(spec.seeds))
        .map(|(&count, chunk)| {
            let (mean_var, std_var, _, _, failures) = batch_row(chunk.iter().flatten(), spec.seeds);
            CollabRow {
                count,
                n,
                p: count as f64 / n as f64,
                seeds: spec.seeds,
                mean_var,
                std_var,
                failures,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> CollabSpec {
        let mut s = CollabSpec::default();
        s.base.t_f = 30.0;
        s.base.metrics_window = 10.0;
        s.counts = vec![25, 0, 12];
        s.seeds = 2;
        s.jobs = Some(2);
        s
    }

    #[test]
    fn rows_sorted_by_share() {
        let rows = run_collab(&short()).unwrap();
        let p: Vec<f64> = rows.iter().map(|r| r.p).collect();
        assert_eq!(p, vec![0.0, 0.48, 1.0]);
        assert!(rows.iter().all(|r| r.failures == 0 && r.seeds == 2));
    }

    #[test]
    fn preconditions() {
        let mut s = short();
        s.counts = vec![26];
        assert!(run_collab(&s).is_err());
        let mut s = short();
        s.base.alpha_s = 0.5;
        s.base.beta_s = 20.0;
        assert!(run_collab(&s).is_err());
        let mut s = short();
        s.base = SimConfig::default();
        assert!(run_collab(&s).is_err());
    }
}
