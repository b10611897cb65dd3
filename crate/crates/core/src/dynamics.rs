//! Longitudinal car-following laws and linear stability of uniform flow.
//!
//! All functions here are pure. Gaps are front-to-front distances; the
//! vehicle length is subtracted inside the optimal-velocity function and
//! the follow-the-leader denominator.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Result, SimError};

/// Constants of the Bando-FTL model and the actuator caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Weight of the optimal-velocity relaxation [1/s].
    pub alpha: f64,
    /// Weight of the follow-the-leader term [m²/s].
    pub beta: f64,
    /// Vehicle length [m].
    pub l_v: f64,
    /// Optimal-velocity characteristic distance [m].
    pub d_0: f64,
    /// Asymptotic optimal velocity [m/s].
    pub v_max: f64,
    /// Maximum acceleration [m/s²].
    pub a_cap_max: f64,
    /// Maximum deceleration magnitude [m/s²].
    pub a_cap_min: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 20.0,
            l_v: 4.5,
            d_0: 2.5,
            v_max: 9.75,
            a_cap_max: 2.5,
            a_cap_min: 4.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.alpha,
            self.beta,
            self.l_v,
            self.d_0,
            self.v_max,
            self.a_cap_max,
            self.a_cap_min,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(SimError::config("model parameters must be finite"));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(SimError::config("alpha and beta must be non-negative"));
        }
        if self.alpha == 0.0 && self.beta == 0.0 {
            return Err(SimError::config("alpha and beta cannot both be zero"));
        }
        if self.l_v <= 0.0 || self.d_0 <= 0.0 || self.v_max <= 0.0 {
            return Err(SimError::config("l_v, d_0 and v_max must be positive"));
        }
        if self.a_cap_max <= 0.0 || self.a_cap_min <= 0.0 {
            return Err(SimError::config("acceleration caps must be positive"));
        }
        Ok(())
    }

    /// Same constants with different model weights.
    pub fn with_weights(&self, alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            ..*self
        }
    }
}

/// Intelligent Driver Model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdmParams {
    pub v0: f64,
    pub s0: f64,
    #[serde(rename = "T")]
    pub time_headway: f64,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            v0: 30.0,
            s0: 2.0,
            time_headway: 1.5,
            a: 1.0,
            b: 2.0,
            delta: 4.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.v0, self.s0, self.time_headway, self.a, self.b, self.delta];
        if all.iter().all(|x| x.is_finite() && *x > 0.0) {
            Ok(())
        } else {
            Err(SimError::config("IDM parameters must be strictly positive"))
        }
    }
}

fn ov_argument(gap: f64, p: &ModelParams) -> f64 {
    (gap - p.l_v) / p.d_0 - 2.0
}

/// Optimal velocity for a front-to-front gap.
pub fn optimal_velocity(gap: f64, p: &ModelParams) -> f64 {
    let t2 = 2.0_f64.tanh();
    p.v_max * (ov_argument(gap, p).tanh() + t2) / (1.0 + t2)
}

/// Derivative of [`optimal_velocity`] with respect to the gap.
pub fn optimal_velocity_prime(gap: f64, p: &ModelParams) -> f64 {
    let t2 = 2.0_f64.tanh();
    let sech = 1.0 / ov_argument(gap, p).cosh();
    p.v_max * sech * sech / (p.d_0 * (1.0 + t2))
}

/// Speed of the uniform flow with equal headways `headway`.
pub fn equilibrium_speed(headway: f64, p: &ModelParams) -> Result<f64> {
    if !(headway > p.l_v) {
        return Err(SimError::Domain(format!(
            "headway {headway} must exceed vehicle length {}",
            p.l_v
        )));
    }
    Ok(optimal_velocity(headway, p))
}

/// Uncapped Bando-FTL acceleration.
pub fn bando_ftl_accel(v_ego: f64, gap: f64, v_leader: f64, p: &ModelParams) -> Result<f64> {
    let net = gap - p.l_v;
    if !(net > 0.0) {
        return Err(SimError::Collision(format!(
            "gap {gap} is not larger than vehicle length {}",
            p.l_v
        )));
    }
    let bando = if p.alpha == 0.0 {
        0.0
    } else {
        p.alpha * (optimal_velocity(gap, p) - v_ego)
    };
    let ftl = if p.beta == 0.0 {
        0.0
    } else {
        p.beta * (v_leader - v_ego) / (net * net)
    };
    Ok(bando + ftl)
}

/// IDM acceleration. `dv` is the approach rate `v_ego - v_leader`; `gap_net`
/// is bumper-to-bumper.
pub fn idm_accel(v_ego: f64, gap_net: f64, dv: f64, q: &IdmParams) -> Result<f64> {
    if !(gap_net > 0.0) {
        return Err(SimError::Collision(format!(
            "net gap {gap_net} is not positive"
        )));
    }
    let s_star = q.s0 + v_ego * q.time_headway + v_ego * dv / (2.0 * (q.a * q.b).sqrt());
    Ok(q.a * (1.0 - (v_ego / q.v0).powf(q.delta) - (s_star / gap_net).powi(2)))
}

pub fn clamp_accel(a_raw: f64, p: &ModelParams) -> f64 {
    a_raw.max(-p.a_cap_min).min(p.a_cap_max)
}

/// The printed density-based instability inequality, evaluated as written.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaperCriterion {
    pub unstable: bool,
    pub lhs: f64,
    pub rhs: f64,
}

pub fn stability_paper(p: &ModelParams, n: usize, length: f64) -> PaperCriterion {
    let nf = n as f64;
    let lhs = p.alpha / 2.0 + length * length * p.beta / (nf * nf);
    let rhs = optimal_velocity_prime(nf / length, p);
    PaperCriterion {
        unstable: lhs < rhs,
        lhs,
        rhs,
    }
}

/// Default threshold on the leading eigenvalue real part.
pub const EIGEN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub paper_criterion_unstable: bool,
    pub paper_lhs: f64,
    pub paper_rhs: f64,
    /// Largest real part over all eigenvalues except the translation mode.
    pub eigen_max_real: f64,
    pub eigen_unstable: bool,
}

/// Complex number in the minimal form needed for the quadratic per Fourier mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

/// Partial derivatives of the Bando-FTL right-hand side at uniform flow.
#[derive(Debug, Clone, Copy)]
struct Linearization {
    /// d(accel)/d(gap)
    gap: f64,
    /// d(accel)/d(own speed)
    own: f64,
    /// d(accel)/d(leader speed)
    leader: f64,
}

fn linearize(p: &ModelParams, headway: f64) -> Linearization {
    let net = headway - p.l_v;
    let ftl = p.beta / (net * net);
    Linearization {
        gap: p.alpha * optimal_velocity_prime(headway, p),
        own: -p.alpha - ftl,
        leader: ftl,
    }
}

fn csqrt(re: f64, im: f64) -> (f64, f64) {
    let r = re.hypot(im);
    let sr = ((r + re) / 2.0).max(0.0).sqrt();
    let si = ((r - re) / 2.0).max(0.0).sqrt();
    (sr, if im < 0.0 { -si } else { si })
}

/// All `2n` eigenvalues of the single-lane system linearized about uniform
/// flow, grouped by Fourier mode `k = 0..n`. Mode `k` solves
/// `λ² − (own + leader·ω)λ − gap·(ω − 1) = 0` with `ω = exp(2πik/n)`.
pub fn circulant_eigenvalues(p: &ModelParams, n: usize, length: f64) -> Result<Vec<[Eigenvalue; 2]>> {
    if n < 2 {
        return Err(SimError::Domain(format!("need at least two vehicles, got {n}")));
    }
    let h = length / n as f64;
    if !(h > p.l_v) {
        return Err(SimError::Domain(format!(
            "headway {h} must exceed vehicle length {}",
            p.l_v
        )));
    }
    let lin = linearize(p, h);
    let modes = (0..n)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / n as f64;
            let (wr, wi) = (theta.cos(), theta.sin());
            // λ² + bλ + c = 0
            let (br, bi) = (-(lin.own + lin.leader * wr), -(lin.leader * wi));
            let (cr, ci) = (-lin.gap * (wr - 1.0), -lin.gap * wi);
            let (dr, di) = (br * br - bi * bi - 4.0 * cr, 2.0 * br * bi - 4.0 * ci);
            let (sr, si) = csqrt(dr, di);
            [
                Eigenvalue {
                    re: (-br + sr) / 2.0,
                    im: (-bi + si) / 2.0,
                },
                Eigenvalue {
                    re: (-br - sr) / 2.0,
                    im: (-bi - si) / 2.0,
                },
            ]
        })
        .collect();
    Ok(modes)
}

/// Linear stability of uniform flow from the circulant eigenstructure.
pub fn stability_eigen(p: &ModelParams, n: usize, length: f64) -> Result<StabilityReport> {
    let modes = circulant_eigenvalues(p, n, length)?;
    let mut max_real = f64::NEG_INFINITY;
    for (k, pair) in modes.iter().enumerate() {
        if k == 0 {
            // λ = 0 (translation) and λ = −α.
            let q = if pair[0].re.abs() <= pair[1].re.abs() {
                pair[1]
            } else {
                pair[0]
            };
            max_real = max_real.max(q.re);
        } else {
            max_real = max_real.max(pair[0].re).max(pair[1].re);
        }
    }
    let paper = stability_paper(p, n, length);
    Ok(StabilityReport {
        paper_criterion_unstable: paper.unstable,
        paper_lhs: paper.lhs,
        paper_rhs: paper.rhs,
        eigen_max_real: max_real,
        eigen_unstable: max_real > EIGEN_TOLERANCE,
    })
}
