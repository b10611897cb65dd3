#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use ringsim_core::dynamics::ModelParams;
use ringsim_core::engine::{EventKind, TrajectoryRecord};
use ringsim_core::ring::VehicleClass;
use ringsim_core::{RunResult, SimConfig, Termination};

const H: f64 = 1e-30;

fn ov(gap: Complex64, p: &ModelParams) -> Complex64 {
    let t2 = 2.0_f64.tanh();
    ((gap - p.l_v) / p.d_0 - 2.0).tanh().scale(p.v_max) / (1.0 + t2) + p.v_max * t2 / (1.0 + t2)
}

/// Right-hand side of the ring ODE with state `[x_0..x_n, v_0..v_n]`.
fn rhs(state: &[Complex64], p: &ModelParams, length: f64) -> Vec<Complex64> {
    let n = state.len() / 2;
    let (x, v) = state.split_at(n);
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * n];
    for i in 0..n {
        let j = (i + 1) % n;
        let mut gap = x[j] - x[i];
        if j == 0 {
            gap += length;
        }
        let net = gap - p.l_v;
        out[i] = v[i];
        out[n + i] = (ov(gap, p) - v[i]).scale(p.alpha) + (v[j] - v[i]).scale(p.beta) / (net * net);
    }
    out
}

/// Jacobian at uniform flow by complex-step differentiation.
pub fn dense_jacobian(p: &ModelParams, n: usize, length: f64) -> DMatrix<f64> {
    let h = length / n as f64;
    let v0 = ov(Complex64::new(h, 0.0), p).re;
    let base: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(i as f64 * h, 0.0))
        .chain((0..n).map(|_| Complex64::new(v0, 0.0)))
        .collect();
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    for c in 0..2 * n {
        let mut s = base.clone();
        s[c].im = H;
        for (r, f) in rhs(&s, p, length).iter().enumerate() {
            jac[(r, c)] = f.im / H;
        }
    }
    jac
}

/// Greedy nearest matching; returns the largest distance.
pub fn match_spectra(a: &[Complex64], mut b: Vec<Complex64>) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut worst: f64 = 0.0;
    for z in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .map(|(k, w)| (k, (z - w).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        worst = worst.max(d);
        b.swap_remove(k);
    }
    worst
}

pub fn random_params(rng: &mut impl Rng) -> ModelParams {
    ModelParams {
        alpha: rng.gen_range(0.1..4.0),
        beta: rng.gen_range(0.0..60.0),
        l_v: rng.gen_range(3.0..6.0),
        d_0: rng.gen_range(1.0..4.0),
        v_max: rng.gen_range(5.0..15.0),
        ..ModelParams::default()
    }
}

/// Spearman correlation with average ranks for ties; NaN when either side
/// is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
    let sy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
    cov / (sx * sy)
}

/// `key=value` fields of an event note.
pub fn note_field(note: &str, key: &str) -> Option<f64> {
    note.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
        .and_then(|v| v.parse().ok())
}

fn check_snapshot(cfg: &SimConfig, snap: &[TrajectoryRecord], total: usize, out: &mut Vec<String>) {
    let t = snap[0].t;
    if snap.len() != total {
        out.push(format!("t={t}: {} vehicles recorded, expected {total}", snap.len()));
    }
    let ids: HashSet<u32> = snap.iter().map(|r| r.vid).collect();
    if ids.len() != snap.len() {
        out.push(format!("t={t}: duplicate vehicle ids"));
    }
    let mut per_lane: HashMap<usize, Vec<f64>> = HashMap::new();
    for r in snap {
        let len = cfg.lane_lengths[r.lane];
        if r.v < 0.0 || !r.v.is_finite() {
            out.push(format!("t={t}: vehicle {} has speed {}", r.vid, r.v));
        }
        if !(0.0..len).contains(&r.x) {
            out.push(format!("t={t}: vehicle {} at {} outside [0, {len})", r.vid, r.x));
        }
        per_lane.entry(r.lane).or_default().push(r.x);
    }
    for (lane, mut xs) in per_lane {
        let len = cfg.lane_lengths[lane];
        xs.sort_by(f64::total_cmp);
        for (k, x) in xs.iter().enumerate() {
            let next = if k + 1 == xs.len() { xs[0] + len } else { xs[k + 1] };
            if xs.len() > 1 && next - x <= cfg.model.l_v {
                out.push(format!("t={t}: lane {lane} gap {} <= l_v", next - x));
            }
        }
    }
}

/// Safety audit of one run: completion, recorded snapshots, per-step
/// vehicle counts, lane-change predicates and cooldowns. Returns the
/// violations found.
pub fn audit(cfg: &SimConfig, res: &RunResult) -> Vec<String> {
    let mut out = Vec::new();
    let tag = format!("seed {}", cfg.seed);
    if res.status != Termination::Completed {
        out.push(format!("{tag}: {} {}", res.status, res.message.clone().unwrap_or_default()));
    }
    let total: usize = cfg.n_per_lane.iter().sum();
    for k in 0..res.series.samples() {
        let c: usize = (0..cfg.lanes()).map(|l| res.series.count(k, l)).sum();
        if c != total {
            out.push(format!("{tag}: step {k} holds {c} vehicles"));
            break;
        }
    }
    for snap in res.trajectory.chunk_by(|a, b| a.t == b.t) {
        check_snapshot(cfg, snap, total, &mut out);
    }
    let mut v: Vec<_> = res.final_state.lanes.iter().flat_map(|l| &l.vehicles).collect();
    v.sort_by_key(|x| x.id);
    if v.windows(2).any(|w| w[0].id == w[1].id) || v.len() != total {
        out.push(format!("{tag}: final state is not a permutation of the fleet"));
    }
    if v.iter().any(|x| x.vel < 0.0) {
        out.push(format!("{tag}: negative final speed"));
    }
    let av: HashSet<u32> = v.iter().filter(|x| x.class == VehicleClass::Av).map(|x| x.id).collect();

    let mut last: HashMap<u32, f64> = HashMap::new();
    for e in &res.events {
        let cooldown = match e.kind {
            EventKind::LaneChange => cfg.lc.tau,
            EventKind::LcVariance => cfg.ctl.t2,
            _ => continue,
        };
        if e.kind == EventKind::LaneChange && av.contains(&e.vid) {
            out.push(format!("{tag}: AV {} made a human lane change", e.vid));
        }
        if e.kind == EventKind::LcVariance && !av.contains(&e.vid) {
            out.push(format!("{tag}: human {} made an AV lane change", e.vid));
        }
        let prev = match e.kind {
            EventKind::LcVariance => last.get(&e.vid).copied().unwrap_or(0.0),
            _ => last.get(&e.vid).copied().unwrap_or(f64::NEG_INFINITY),
        };
        if !(e.t > prev + cooldown) {
            out.push(format!("{tag}: vehicle {} changed lanes at {} within cooldown of {prev}", e.vid, e.t));
        }
        last.insert(e.vid, e.t);

        let (a_i, a_new) = (e.a_i.unwrap_or(f64::NAN), e.a_new.unwrap_or(f64::NAN));
        if e.kind == EventKind::LaneChange && !(a_new > a_i + cfg.lc.delta_i) {
            out.push(format!("{tag}: incentive {a_new} <= {a_i} + delta_i at t={}", e.t));
        }
        if let Some(f) = e.a_fol {
            if !(f > -cfg.lc.delta_s) {
                out.push(format!("{tag}: follower braking {f} at t={}", e.t));
            }
        }
        let s_new = note_field(&e.note, "s_new").unwrap_or(f64::NAN);
        if !(s_new > -cfg.lc.delta_s) {
            out.push(format!("{tag}: own braking {s_new} at t={}", e.t));
        }
        let ahead = note_field(&e.note, "m_ahead").unwrap_or(f64::NAN);
        if !(ahead > cfg.lc.min_clearance) {
            out.push(format!("{tag}: clearance ahead {ahead} at t={}", e.t));
        }
        if let Some(behind) = note_field(&e.note, "m_behind") {
            if !(behind > cfg.lc.min_clearance) {
                out.push(format!("{tag}: clearance behind {behind} at t={}", e.t));
            }
        }
    }
    out
}
