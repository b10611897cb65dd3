//! Microscopic simulation of multi-lane ring roads.
//!
//! Human drivers follow the Bando-FTL car-following law (optionally IDM) and
//! change lanes with an incentive/safety/cooldown rule. A single autonomous
//! vehicle can be inserted with a proportional speed controller and a
//! variance-seeking lateral controller; a share of drivers can be made
//! collaborative by giving them stable model weights. The [`harness`] module
//! runs seeded parameter sweeps in parallel and renders SVG heatmaps.

pub mod config;
pub mod control;
pub mod drivers;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod harness;
pub mod io;
pub mod lane_change;
pub mod metrics;
pub mod ring;

pub use config::SimConfig;
pub use engine::{run, RunResult, Termination};
pub use error::{Result, SimError};
