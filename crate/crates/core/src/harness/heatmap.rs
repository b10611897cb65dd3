use std::fmt::Write;
use std::str::FromStr;

use super::sweep::SweepRow;
use crate::error::{Result, SimError};

/// Sweep-table column that can be drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    MeanVar,
    StdVar,
    MeanSpeed,
    MeanLaneChanges,
    Failures,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::MeanVar => "mean_var",
            Metric::StdVar => "std_var",
            Metric::MeanSpeed => "mean_speed",
            Metric::MeanLaneChanges => "mean_lane_changes",
            Metric::Failures => "failures",
        }
    }

    pub fn value(self, r: &SweepRow) -> f64 {
        match self {
            Metric::MeanVar => r.mean_var,
            Metric::StdVar => r.std_var,
            Metric::MeanSpeed => r.mean_speed,
            Metric::MeanLaneChanges => r.mean_lane_changes,
            Metric::Failures => r.failures as f64,
        }
    }

    fn label(self, v: f64) -> String {
        if !v.is_finite() {
            "n/a".into()
        } else if self == Metric::Failures {
            format!("{v:.0}")
        } else {
            format!("{v:.3}")
        }
    }
}

impl FromStr for Metric {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        [
            Metric::MeanVar,
            Metric::StdVar,
            Metric::MeanSpeed,
            Metric::MeanLaneChanges,
            Metric::Failures,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| SimError::Input(format!("unknown metric {s:?}")))
    }
}

const STOPS: [(f64, f64, f64); 3] = [(68.0, 1.0, 84.0), (33.0, 145.0, 140.0), (253.0, 231.0, 37.0)];

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * 2.0;
    let k = (t.floor() as usize).min(1);
    let f = t - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Sorted distinct values, merging those closer than 1e-9.
fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    v
}

fn index_of(axis: &[f64], x: f64) -> usize {
    axis.iter().position(|a| (a - x).abs() < 1e-9).expect("value comes from the axis")
}

const CELL_W: usize = 64;
const CELL_H: usize = 36;
const LEFT: usize = 80;
const TOP: usize = 48;
const LEGEND_W: usize = 110;
const BOTTOM: usize = 64;

/// Self-contained SVG with Δ_I across and Δ_s upwards.
pub fn render_heatmap(rows: &[SweepRow], metric: Metric) -> Result<String> {
    if rows.is_empty() {
        return Err(SimError::Input("empty sweep table".into()));
    }
    let xs = distinct(rows.iter().map(|r| r.delta_i).collect());
    let ys = distinct(rows.iter().map(|r| r.delta_s).collect());
    let (nx, ny) = (xs.len(), ys.len());
    let mut grid: Vec<Option<f64>> = vec![None; nx * ny];
    for r in rows {
        let slot = &mut grid[index_of(&ys, r.delta_s) * nx + index_of(&xs, r.delta_i)];
        if slot.replace(metric.value(r)).is_some() {
            return Err(SimError::Input(format!(
                "duplicate cell (delta_i={}, delta_s={})",
                r.delta_i, r.delta_s
            )));
        }
    }
    if grid.iter().any(Option::is_none) {
        return Err(SimError::Input(format!(
            "ragged grid: {} rows for {nx} x {ny} cells",
            rows.len()
        )));
    }
    let values: Vec<f64> = grid.into_iter().flatten().collect();
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let constant = finite.is_empty() || hi - lo <= 0.0;
    let shade = |v: f64| -> (String, f64) {
        if !v.is_finite() {
            ("#bdbdbd".into(), 1.0)
        } else if constant {
            (color(0.5), 0.5)
        } else {
            let t = (v - lo) / (hi - lo);
            (color(t), t)
        }
    };

    let width = LEFT + nx * CELL_W + LEGEND_W;
    let height = TOP + ny * CELL_H + BOTTOM;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{}</text>"#,
        LEFT + nx * CELL_W / 2,
        metric.name()
    );
    for (k, v) in values.iter().enumerate() {
        let (i, j) = (k % nx, k / nx);
        let x = LEFT + i * CELL_W;
        let y = TOP + (ny - 1 - j) * CELL_H;
        let (fill, t) = shade(*v);
        let ink = if t < 0.55 { "white" } else { "black" };
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{fill}" stroke="white"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle" fill="{ink}">{}</text>"#,
            x + CELL_W / 2,
            y + CELL_H / 2 + 4,
            metric.label(*v)
        );
    }
    let axis_y = TOP + ny * CELL_H;
    for (i, x) in xs.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{x}</text>"#,
            LEFT + i * CELL_W + CELL_W / 2,
            axis_y + 16
        );
    }
    for (j, y) in ys.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{y}</text>"#,
            LEFT - 6,
            TOP + (ny - 1 - j) * CELL_H + CELL_H / 2 + 4
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">Δ_I [m/s²]</text>"#,
        LEFT + nx * CELL_W / 2,
        axis_y + 40
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">Δ_s [m/s²]</text>"#,
        TOP + ny * CELL_H / 2,
        TOP + ny * CELL_H / 2
    );

    let lx = LEFT + nx * CELL_W + 24;
    let bar_h = (ny * CELL_H).max(CELL_H);
    if constant {
        let v = finite.first().copied().unwrap_or(f64::NAN);
        let fill = if v.is_finite() { color(0.5) } else { "#bdbdbd".into() };
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{TOP}" width="18" height="{CELL_H}" fill="{fill}" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11">{}</text>"#,
            lx + 24,
            TOP + CELL_H / 2 + 4,
            metric.label(v)
        );
    } else {
        let _ = writeln!(s, r#"<defs><linearGradient id="scale" x1="0" y1="1" x2="0" y2="0">"#);
        for (k, t) in [0.0, 0.5, 1.0].iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<stop offset="{}%" stop-color="{}"/>"#,
                k * 50,
                color(*t)
            );
        }
        let _ = writeln!(s, "</linearGradient></defs>");
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{TOP}" width="18" height="{bar_h}" fill="url(#scale)" stroke="black"/>"#
        );
        let mid = (lo + hi) / 2.0;
        for (v, y) in [(hi, TOP + 4), (mid, TOP + bar_h / 2 + 4), (lo, TOP + bar_h)] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}" font-size="11">{}</text>"#,
                lx + 24,
                metric.label(v)
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}
