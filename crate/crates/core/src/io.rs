//! Flat-file persistence: CSV tables, JSON metrics.

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::engine::{Event, TrajectoryRecord};
use crate::error::Result;
use crate::metrics::RunMetrics;

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "lane", "vid", "class", "x", "v", "a"];
pub const EVENT_HEADER: [&str; 9] = [
    "t", "kind", "vid", "from_lane", "to_lane", "a_i", "a_new", "a_fol", "note",
];

/// Writes `rows` as CSV under an explicit header, so empty tables still carry
/// their column names.
pub fn write_csv_to<W: Write, T: Serialize>(out: W, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, header: &[&str], rows: &[T]) -> Result<()> {
    write_csv_to(BufWriter::new(File::create(path)?), header, rows)
}

pub fn read_csv_from<R: Read, T: DeserializeOwned>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    read_csv_from(File::open(path)?)
}

pub fn write_trajectory(path: impl AsRef<Path>, rows: &[TrajectoryRecord]) -> Result<()> {
    write_csv(path, &TRAJECTORY_HEADER, rows)
}

pub fn write_events(path: impl AsRef<Path>, rows: &[Event]) -> Result<()> {
    write_csv(path, &EVENT_HEADER, rows)
}

/// Pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_metrics(path: impl AsRef<Path>, m: &RunMetrics) -> Result<()> {
    write_json(path, m)
}
