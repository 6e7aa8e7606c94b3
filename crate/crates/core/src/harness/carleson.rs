//! Discretized Carleson integral `I(R) = ∫_0^R ∫_{B(x_0,R)∩Γ} β² dμ dr/r`.
//!
//! For each outer radius `R` a surrogate sample of `B(x_0, R) ∩ Γ` is drawn.
//! At every scale `r_k ≤ R`, farthest-point centers are chosen among the
//! surrogate points whose beta proposals stay inside the graph's box. Each
//! center is weighted by the measure of its Voronoi cell in the surrogate
//! sample, and each scale by `ln 2`.

use std::f64::consts::LN_2;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_graph, loglog_slope, RunConfig};
use crate::beta::{beta_number, proposal_bounds, sample_ball};
use crate::error::{HsError, Result};
use crate::graphs::IntrinsicGraph;
use crate::heisenberg::HPoint;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleContribution {
    pub k: usize,
    pub r: f64,
    /// `ln 2 · Σ_centers β² · cell measure`.
    pub contribution: f64,
    pub stderr: f64,
    pub centers: usize,
    /// Centers whose ball held too few samples; they contribute zero.
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusSummary {
    pub radius: f64,
    /// `I(R)`, the sum of the per-scale contributions.
    pub integral: f64,
    pub stderr: f64,
    /// `I(R) / R^{2n+1}`.
    pub ratio: f64,
    /// Estimated measure of `B(x_0, R) ∩ Γ`.
    pub measure: f64,
    pub per_scale: Vec<ScaleContribution>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    /// Slope of `ln I(R)` against `ln R`.
    pub slope: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub config: RunConfig,
    pub base_point: HPoint,
    /// Contributions at `R = R_max`.
    pub per_scale: Vec<ScaleContribution>,
    /// `I(R_max)`.
    pub integral: f64,
    /// One entry per `R ∈ {R_max/4, R_max/2, R_max}`.
    pub radii: Vec<RadiusSummary>,
    /// `None` when some `I(R)` vanishes.
    pub exponent_fit: Option<ExponentFit>,
    /// `max_R I(R)/R^{2n+1}`.
    pub ratio_envelope: f64,
    /// `max_R I(R)/R^{2n+1}` divided by the minimum; infinite if the minimum is 0.
    pub ratio_spread: f64,
    pub monotone: bool,
    /// Scales actually used, after any shrinking.
    pub scales_used: usize,
    pub warnings: Vec<String>,
}

struct Task {
    radius_index: usize,
    k: usize,
    center: HPoint,
    cell: f64,
}

fn inside(g: &IntrinsicGraph, lo: &[f64], hi: &[f64]) -> bool {
    let d = g.domain();
    d.contains(lo) && d.contains(hi)
}

/// Greedy farthest-point selection of up to `count` indices from `pool`,
/// starting from the point nearest `start`. Ties go to the lowest index.
fn farthest_points(points: &[HPoint], pool: &[usize], start: &HPoint, count: usize) -> Vec<usize> {
    if pool.is_empty() {
        return Vec::new();
    }
    let mut best = vec![f64::INFINITY; pool.len()];
    let first = (0..pool.len())
        .min_by(|&a, &b| start.gauge_dist(&points[pool[a]]).total_cmp(&start.gauge_dist(&points[pool[b]])))
        .expect("nonempty");
    let mut chosen = vec![first];
    while chosen.len() < count.min(pool.len()) {
        let last = &points[pool[*chosen.last().expect("nonempty")]];
        for (slot, &i) in best.iter_mut().zip(pool) {
            *slot = slot.min(last.gauge_dist(&points[i]));
        }
        let next = (0..pool.len()).fold(0, |m, i| if best[i] > best[m] { i } else { m });
        if best[next] <= 0.0 {
            break;
        }
        chosen.push(next);
    }
    chosen.into_iter().map(|c| pool[c]).collect()
}

/// Runs the Carleson experiment described by `cfg`.
pub fn run_carleson(cfg: &RunConfig) -> Result<CarlesonReport> {
    let g = build_graph(cfg)?;
    run_carleson_on(&g, cfg)
}

/// As [`run_carleson`], on an already built graph.
pub fn run_carleson_on(g: &IntrinsicGraph, cfg: &RunConfig) -> Result<CarlesonReport> {
    cfg.validate()?;
    let n = g.n();
    let x0 = g.graph_point(&HPoint::origin(n))?;
    let scales = cfg.scales();
    let radii = [cfg.radius_max / 4.0, cfg.radius_max / 2.0, cfg.radius_max];
    let mut warnings = Vec::new();

    // Surrogate samples and admissible pools per (radius, scale).
    let mut surrogates = Vec::new();
    let mut measures = Vec::new();
    let mut unit_cells = Vec::new();
    for (j, &big) in radii.iter().enumerate() {
        let mut stream = rng::stream(cfg.seed, &[0x5A, j as u64]);
        let ball = sample_ball(g, &x0, big, cfg.surrogate_samples, &mut stream);
        if ball.clipped > 0 {
            warnings.push(format!("surrogate sample of radius {big} clipped {} proposals", ball.clipped));
        }
        measures.push(ball.measure().0);
        unit_cells.push(ball.proposal_volume / ball.proposals() as f64);
        surrogates.push(ball.points);
    }
    let admissible = |j: usize, k: usize| -> Vec<usize> {
        (0..surrogates[j].len())
            .filter(|&i| {
                let (lo, hi) = proposal_bounds(g, &surrogates[j][i], scales[k]);
                inside(g, &lo, &hi)
            })
            .collect()
    };

    // Shrink K from the fine end while some radius cannot seat a full net.
    let mut scales_used = scales.len();
    let mut pools: Vec<Vec<Option<Vec<usize>>>> = vec![vec![None; scales.len()]; radii.len()];
    for k in 0..scales.len() {
        let mut ok = true;
        for j in 0..radii.len() {
            if scales[k] > radii[j] * (1.0 + 1e-12) {
                continue;
            }
            let pool = admissible(j, k);
            if pool.len() < cfg.centers_per_scale {
                ok = false;
            }
            pools[j][k] = Some(pool);
        }
        if !ok {
            if k < 3 {
                return Err(HsError::TooFewSamples { got: k, needed: 3 });
            }
            warnings.push(format!("too few in-domain net points at scale {}; using {k} scales", scales[k]));
            scales_used = k;
            break;
        }
    }

    let mut tasks = Vec::new();
    for (j, per_k) in pools.iter().enumerate() {
        for (k, pool) in per_k.iter().enumerate().take(scales_used) {
            let Some(pool) = pool else { continue };
            let pts = &surrogates[j];
            let centers = farthest_points(pts, pool, &x0, cfg.centers_per_scale);
            let mut counts = vec![0usize; centers.len()];
            for p in pts {
                let nearest = (0..centers.len())
                    .min_by(|&a, &b| p.gauge_dist(&pts[centers[a]]).total_cmp(&p.gauge_dist(&pts[centers[b]])))
                    .expect("centers nonempty");
                counts[nearest] += 1;
            }
            for (c, count) in centers.iter().zip(counts) {
                tasks.push(Task { radius_index: j, k, center: pts[*c].clone(), cell: count as f64 * unit_cells[j] });
            }
        }
    }

    let results: Vec<Result<Option<(f64, f64)>>> = tasks
        .par_iter()
        .enumerate()
        .map(|(t, task)| {
            let key = rng::derive_key(cfg.seed, &[0xBE7A, task.radius_index as u64, task.k as u64, t as u64]);
            match beta_number(g, &task.center, scales[task.k], cfg.samples_per_beta, key) {
                Ok(b) => Ok(Some((b.value, b.stderr))),
                Err(HsError::TooFewSamples { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut summaries: Vec<RadiusSummary> = radii
        .iter()
        .zip(&measures)
        .map(|(&radius, &measure)| RadiusSummary {
            radius,
            integral: 0.0,
            stderr: 0.0,
            ratio: 0.0,
            measure,
            per_scale: Vec::new(),
        })
        .collect();
    let mut variances = vec![vec![0.0; scales_used]; radii.len()];
    for (task, res) in tasks.iter().zip(results) {
        let s = &mut summaries[task.radius_index];
        let entry = match s.per_scale.iter().position(|e| e.k == task.k) {
            Some(i) => i,
            None => {
                s.per_scale.push(ScaleContribution {
                    k: task.k,
                    r: scales[task.k],
                    contribution: 0.0,
                    stderr: 0.0,
                    centers: 0,
                    failed: 0,
                });
                s.per_scale.len() - 1
            }
        };
        let e = &mut s.per_scale[entry];
        e.centers += 1;
        match res? {
            Some((beta, se)) => {
                e.contribution += LN_2 * beta * beta * task.cell;
                variances[task.radius_index][task.k] += (LN_2 * 2.0 * beta * se * task.cell).powi(2);
            }
            None => e.failed += 1,
        }
    }
    let power = 2 * n as i32 + 1;
    for (j, s) in summaries.iter_mut().enumerate() {
        for e in &mut s.per_scale {
            e.stderr = variances[j][e.k].sqrt();
        }
        s.integral = s.per_scale.iter().map(|e| e.contribution).sum();
        s.stderr = s.per_scale.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt();
        s.ratio = s.integral / s.radius.powi(power);
        let failed: usize = s.per_scale.iter().map(|e| e.failed).sum();
        if failed > 0 {
            warnings.push(format!("radius {}: {failed} centers had too few ball samples", s.radius));
        }
    }

    let ratios: Vec<f64> = summaries.iter().map(|s| s.ratio).collect();
    let ratio_envelope = ratios.iter().cloned().fold(0.0, f64::max);
    let ratio_min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio_spread = if ratio_min > 0.0 { ratio_envelope / ratio_min } else { f64::INFINITY };
    let integrals: Vec<f64> = summaries.iter().map(|s| s.integral).collect();
    let exponent_fit = loglog_slope(&radii, &integrals).map(|(slope, stderr)| ExponentFit { slope, stderr });
    let monotone = integrals.windows(2).all(|w| w[0] <= w[1]);
    let top = summaries.last().expect("three radii");
    Ok(CarlesonReport {
        config: cfg.clone(),
        base_point: x0,
        per_scale: top.per_scale.clone(),
        integral: top.integral,
        radii: summaries.clone(),
        exponent_fit,
        ratio_envelope,
        ratio_spread,
        monotone,
        scales_used,
        warnings,
    })
}

impl CarlesonReport {
    /// The `k,r,contribution` table at `R = R_max`.
    pub fn write_csv_to(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "r", "contribution"]).map_err(csv_error)?;
        for e in &self.per_scale {
            w.serialize((e.k, e.r, e.contribution)).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }
}

fn csv_error(e: csv::Error) -> HsError {
    HsError::Format(e.to_string())
}
