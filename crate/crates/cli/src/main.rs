use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};

use ringsim_core::dynamics::{stability_eigen, stability_paper, ModelParams};
use ringsim_core::harness::{
    self, render_heatmap, run_collab, run_sweep, write_sweep_outputs, Axis, CollabSpec, Metric, Preset,
    SweepSpec, COLLAB_HEADER,
};
use ringsim_core::{io, run, SimConfig};

#[derive(Parser)]
#[command(name = "ringsim", version, about = "Multi-lane ring-road traffic simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Quick,
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the incentive threshold.
        #[arg(long)]
        di: Option<f64>,
        /// Override the safety threshold.
        #[arg(long)]
        ds: Option<f64>,
        #[arg(long)]
        traj: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Sweep the incentive and safety thresholds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// MIN:MAX:STEPS
        #[arg(long)]
        di: Option<Axis>,
        /// MIN:MAX:STEPS
        #[arg(long)]
        ds: Option<Axis>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long, value_enum)]
        av: Option<Switch>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Variance against the share of collaborative drivers.
    Collab {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated collaborative counts.
        #[arg(long, value_delimiter = ',')]
        counts: Vec<usize>,
        #[arg(long)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Linear stability of the uniform flow on one ring.
    Stability {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        length: f64,
        #[arg(long)]
        vmax: Option<f64>,
    },
    /// Draw one column of a sweep table.
    Heatmap {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        metric: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<SimConfig> {
    SimConfig::from_file(path).with_context(|| format!("reading {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            di,
            ds,
            traj,
            events,
            metrics,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(x) = di {
                cfg.lc.delta_i = x;
            }
            if let Some(x) = ds {
                cfg.lc.delta_s = x;
            }
            let res = run(&cfg)?;
            if let Some(p) = traj {
                io::write_trajectory(&p, &res.trajectory)?;
            }
            if let Some(p) = events {
                io::write_events(&p, &res.events)?;
            }
            if let Some(p) = metrics {
                io::write_metrics(&p, &res.metrics)?;
            }
            println!(
                "status={} steps={} mean_var={} mean_speed={} lane_changes={} av_lane_changes={}",
                res.status,
                res.steps_completed,
                res.metrics.mean_last_window_variance,
                res.metrics.mean_speed,
                res.metrics.total_lane_changes,
                res.metrics.av_lane_changes
            );
            if let Some(m) = res.message {
                println!("message={m}");
            }
        }
        Command::Sweep {
            config,
            di,
            ds,
            seeds,
            av,
            out,
            preset,
            jobs,
        } => {
            let base = load(&config)?;
            let av_enabled = av.map_or(base.av_enabled, |s| matches!(s, Switch::On));
            let mut spec = match preset {
                Some(PresetArg::Quick) => Preset::Quick.spec(base, av_enabled),
                Some(PresetArg::Paper) => Preset::Paper.spec(base, av_enabled),
                None => {
                    let (Some(di), Some(ds), Some(seeds)) = (di, ds, seeds) else {
                        bail!("--di, --ds and --seeds are required without --preset");
                    };
                    SweepSpec {
                        delta_i: di,
                        delta_s: ds,
                        seeds,
                        base,
                        av_enabled,
                        jobs: None,
                    }
                }
            };
            if let Some(a) = di {
                spec.delta_i = a;
            }
            if let Some(a) = ds {
                spec.delta_s = a;
            }
            if let Some(k) = seeds {
                spec.seeds = k;
            }
            spec.jobs = jobs;
            let table = run_sweep(&spec)?;
            write_sweep_outputs(&table, &out)?;
            let mut effective = spec.base.clone();
            effective.av_enabled = spec.av_enabled;
            std::fs::write(out.join("config.toml"), effective.to_toml_string())?;
            for m in [Metric::MeanVar, Metric::MeanLaneChanges] {
                let svg = render_heatmap(&table.rows, m)?;
                std::fs::write(out.join(format!("{}.svg", m.name())), svg)?;
            }
            println!(
                "{} cells x {} seeds, {} failed runs, written to {}",
                table.rows.len(),
                spec.seeds,
                table.total_failures(),
                out.display()
            );
        }
        Command::Collab {
            config,
            counts,
            seeds,
            out,
            jobs,
        } => {
            if counts.is_empty() {
                bail!("--counts needs at least one value");
            }
            let spec = CollabSpec {
                counts,
                seeds,
                base: load(&config)?,
                jobs,
            };
            let rows = run_collab(&spec)?;
            std::fs::create_dir_all(&out)?;
            io::write_csv(out.join("collab.csv"), &COLLAB_HEADER, &rows)?;
            for r in &rows {
                println!("p={:.4} count={} mean_var={} std_var={}", r.p, r.count, r.mean_var, r.std_var);
            }
        }
        Command::Stability {
            alpha,
            beta,
            n,
            length,
            vmax,
        } => {
            let mut p = ModelParams::default().with_weights(alpha, beta);
            if let Some(v) = vmax {
                p.v_max = v;
            }
            p.validate()?;
            let paper = stability_paper(&p, n, length);
            let eigen = stability_eigen(&p, n, length)?;
            println!(
                "printed criterion: lhs={} rhs={} -> {}",
                paper.lhs,
                paper.rhs,
                if paper.unstable { "unstable" } else { "stable" }
            );
            println!(
                "eigen analysis: max_re={} -> {}",
                eigen.eigen_max_real,
                if eigen.eigen_unstable { "unstable" } else { "stable" }
            );
            if paper.unstable != eigen.eigen_unstable {
                println!("note: the printed criterion disagrees with the eigen analysis");
            }
        }
        Command::Heatmap { table, metric, out } => {
            let metric: Metric = metric.parse()?;
            let t = harness::read_sweep_table(&table)
                .with_context(|| format!("reading {}", table.display()))?;
            std::fs::write(&out, render_heatmap(&t.rows, metric)?)?;
        }
    }
    Ok(())
}
