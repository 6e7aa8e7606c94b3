//! Affine-approximation integrals of the graph function on cosets `uP_w`.
//!
//! Each coset is a copy of `H_{n−1}` with the restricted gauge. On it,
//! `θ(x, r) = r^{−2m−4} inf_{affine g} ‖F − g‖²_{L2(B(x,r))}` with `m = n − 1`
//! and `F(p) = f(u·p)`, and the experiment estimates
//! `∫_{B(0,R)} ∫_0^R θ(x, r) dr/r dx` against `Lip(F)² R^{2m+2}`.

use std::f64::consts::LN_2;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_graph, RunConfig};
use crate::beta::fit_columns;
use crate::error::{invalid, Result};
use crate::graphs::{slice_lipschitz_constant, IntrinsicGraph};
use crate::heisenberg::{plane_p_w, HPoint};
use crate::linalg;
use crate::rng;

const LIP_PAIRS: usize = 4000;
const VOLUME_SAMPLES: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceTheta {
    pub slice: usize,
    /// The coset is `u P_w` with `u = offset · ν`.
    pub offset: f64,
    /// Estimate of the double integral of `θ`.
    pub integral: f64,
    pub stderr: f64,
    /// Sampled Lipschitz constant of `F` on `B(0, 2R)` in the coset.
    pub lipschitz: f64,
    /// `Lip(F)² · R^{2m+2}`.
    pub bound: f64,
    pub ratio: f64,
    /// Ball evaluations dropped because they left the graph's box.
    pub dropped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    pub config: RunConfig,
    pub radius: f64,
    /// Dimension index `m` of the slices, `P_w ≅ H_m`.
    pub slice_n: usize,
    pub scales: Vec<f64>,
    pub per_slice: Vec<SliceTheta>,
    pub max_ratio: f64,
    /// The a priori slice Lipschitz constant `λλ'/(λ'−λ)`.
    pub lipschitz_bound: f64,
    pub warnings: Vec<String>,
}

/// Coordinates `(c, t)` of a coset: horizontal part `Σ c_i b_i`, height `t`.
struct Coset {
    u: HPoint,
    basis: Vec<Vec<f64>>,
}

impl Coset {
    fn point(&self, c: &[f64], t: f64) -> HPoint {
        let mut h = vec![0.0; self.u.n() * 2];
        for (ci, b) in c.iter().zip(&self.basis) {
            linalg::axpy(*ci, b, &mut h);
        }
        HPoint::from_horizontal(&h, t)
    }

    fn coords(&self, p: &HPoint) -> Vec<f64> {
        let h = p.project_pi();
        self.basis.iter().map(|b| linalg::dot(&h, b)).collect()
    }

    fn value(&self, g: &IntrinsicGraph, p: &HPoint) -> Option<f64> {
        g.f_at(&(&self.u * p).v0_coords())
    }
}

/// Uniform samples `(c, t)` of the unit gauge ball of `H_m`, and the ball's
/// volume estimated from the acceptance rate of `VOLUME_SAMPLES` proposals.
fn unit_ball(m: usize, count: usize, rng: &mut impl Rng) -> Vec<(Vec<f64>, f64)> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let c: Vec<f64> = (0..2 * m).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let t = rng.random_range(-0.25..=0.25);
        let h2 = linalg::dot(&c, &c);
        if h2 * h2 + 16.0 * t * t <= 1.0 {
            out.push((c, t));
        }
    }
    out
}

fn unit_ball_volume(m: usize, seed: u64) -> f64 {
    let mut rng = rng::stream(seed, &[0xB0, m as u64]);
    let mut hits = 0usize;
    for _ in 0..VOLUME_SAMPLES {
        let c: Vec<f64> = (0..2 * m).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let t: f64 = rng.random_range(-0.25..=0.25);
        let h2 = linalg::dot(&c, &c);
        if h2 * h2 + 16.0 * t * t <= 1.0 {
            hits += 1;
        }
    }
    2f64.powi(2 * m as i32) * 0.5 * hits as f64 / VOLUME_SAMPLES as f64
}

/// `θ(x, r)` from the unit-ball sample, or `None` if the ball leaves the box.
fn theta_at(g: &IntrinsicGraph, coset: &Coset, x: &HPoint, r: f64, ball: &[(Vec<f64>, f64)], vol1: f64) -> Option<f64> {
    let mut rows = Vec::with_capacity(ball.len());
    let mut values = Vec::with_capacity(ball.len());
    for (c, t) in ball {
        let p = x * &coset.point(c, *t).dilate(r);
        values.push(coset.value(g, &p)?);
        rows.push(coset.coords(&p));
    }
    let (_, _, resid) = fit_columns(&rows, &values);
    Some(vol1 * resid / ball.len() as f64 / (r * r))
}

fn sampled_lipschitz(g: &IntrinsicGraph, coset: &Coset, reach: f64, m: usize, seed: u64) -> f64 {
    let mut rng = rng::stream(seed, &[0x11F]);
    let ball = unit_ball(m, 2 * LIP_PAIRS, &mut rng);
    let mut worst: f64 = 0.0;
    for i in 0..LIP_PAIRS {
        let p = coset.point(&ball[2 * i].0, ball[2 * i].1).dilate(reach);
        let q = if i % 2 == 0 {
            coset.point(&ball[2 * i + 1].0, ball[2 * i + 1].1).dilate(reach)
        } else {
            let dir = &ball[2 * i + 1].0;
            let len = linalg::norm(dir);
            if len == 0.0 {
                continue;
            }
            let step = linalg::scaled(1e-3 * reach / len, dir);
            &p * &coset.point(&step, 0.0)
        };
        let (Some(a), Some(b)) = (coset.value(g, &p), coset.value(g, &q)) else { continue };
        let d = p.gauge_dist(&q);
        if d > 0.0 {
            worst = worst.max((a - b).abs() / d);
        }
    }
    worst
}

pub fn run_theta_slices(cfg: &RunConfig) -> Result<ThetaReport> {
    let g = build_graph(cfg)?;
    run_theta_slices_on(&g, cfg)
}

/// As [`run_theta_slices`], on an already built graph.
pub fn run_theta_slices_on(g: &IntrinsicGraph, cfg: &RunConfig) -> Result<ThetaReport> {
    cfg.validate()?;
    let n = g.n();
    if n < 2 {
        return invalid("slices need n ≥ 2");
    }
    let m = n - 1;
    let big = cfg.radius_max;
    let scales = cfg.scales();
    let basis = plane_p_w(g.w()).horizontal_basis();
    let normal = g.w().transverse_normal();
    let vol1 = unit_ball_volume(m, cfg.seed);
    let vol_big = vol1 * big.powi(2 * m as i32 + 2);
    let mut offsets_rng = rng::stream(cfg.seed, &[0x0FF5]);
    let offsets: Vec<f64> = (0..cfg.slices).map(|_| offsets_rng.random_range(-0.5..=0.5) * big).collect();

    let per_slice: Vec<Option<SliceTheta>> = offsets
        .par_iter()
        .enumerate()
        .map(|(s, &offset)| {
            let coset = Coset { u: HPoint::from_horizontal(&linalg::scaled(offset, &normal), 0.0), basis: basis.clone() };
            let mut base_rng = rng::stream(cfg.seed, &[0x7E7A, s as u64]);
            let bases: Vec<HPoint> = unit_ball(m, cfg.theta_points, &mut base_rng)
                .into_iter()
                .map(|(c, t)| coset.point(&c, t).dilate(big))
                .collect();
            let mut integral = 0.0;
            let mut variance = 0.0;
            let mut dropped = 0;
            for (k, &r) in scales.iter().enumerate() {
                let mut ball_rng = rng::stream(cfg.seed, &[0xBA11, s as u64, k as u64]);
                let ball = unit_ball(m, cfg.samples_per_beta, &mut ball_rng);
                let vals: Vec<f64> = bases
                    .iter()
                    .filter_map(|x| {
                        let v = theta_at(g, &coset, x, r, &ball, vol1);
                        if v.is_none() {
                            dropped += 1;
                        }
                        v
                    })
                    .collect();
                if vals.is_empty() {
                    return None;
                }
                let cnt = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / cnt;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (cnt - 1.0).max(1.0);
                integral += LN_2 * vol_big * mean;
                variance += (LN_2 * vol_big).powi(2) * var / cnt;
            }
            let lipschitz = sampled_lipschitz(g, &coset, 2.0 * big, m, rng::derive_key(cfg.seed, &[s as u64]));
            let bound = lipschitz * lipschitz * big.powi(2 * m as i32 + 2);
            let ratio = if bound > 0.0 { integral / bound } else { 0.0 };
            Some(SliceTheta { slice: s, offset, integral, stderr: variance.sqrt(), lipschitz, bound, ratio, dropped })
        })
        .collect();

    let mut warnings = Vec::new();
    let mut kept = Vec::new();
    for (s, entry) in per_slice.into_iter().enumerate() {
        match entry {
            Some(e) => {
                if e.dropped > 0 {
                    warnings.push(format!("slice {s}: {} ball evaluations left the box", e.dropped));
                }
                kept.push(e);
            }
            None => warnings.push(format!("slice {s} skipped: no ball fits in the box")),
        }
    }
    let max_ratio = kept.iter().map(|e| e.ratio).fold(0.0, f64::max);
    Ok(ThetaReport {
        config: cfg.clone(),
        radius: big,
        slice_n: m,
        scales,
        per_slice: kept,
        max_ratio,
        lipschitz_bound: slice_lipschitz_constant(g.lambda(), g.lambda_prime()),
        warnings,
    })
}
