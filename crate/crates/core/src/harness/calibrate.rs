//! Empirical constant `c` of the sandwich
//! `Q_w(g, r/c) ⊂ Π_w(B(g, r) ∩ Γ) ⊂ Q_w(g, c r)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::{proposal_bounds, sample_ball, BoxCoords, QuasiBox};
use crate::error::{invalid, HsError, Result};
use crate::graphs::IntrinsicGraph;
use crate::heisenberg::{project_along, HPoint};
use crate::linalg;
use crate::rng;

/// Search interval for `c`.
pub const C_MAX: f64 = 64.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSettings {
    pub radii: Vec<f64>,
    /// Graph points `g` per radius.
    pub centers: usize,
    /// Proposals drawn to sample each ball `B(g, r) ∩ Γ`.
    pub ball_samples: usize,
    /// Points of the unit box tested for the inner inclusion, half of them
    /// on its boundary.
    pub box_samples: usize,
    /// Centers are drawn from the graph's box shrunk by this factor.
    pub center_spread: f64,
    pub seed: u64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            radii: vec![0.25, 1.0, 4.0],
            centers: 6,
            ball_samples: 20_000,
            box_samples: 1500,
            center_spread: 0.3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusCalibration {
    pub r: f64,
    /// Smallest `c` for which both inclusions hold at this radius.
    pub c: f64,
    /// Largest `ρ/r` with `Π_w(p) ∈ Q_w(g, ρ)` over sampled ball points `p`.
    pub c_upper: f64,
    /// Smallest `c` for which `Q_w(g, r/c)` maps into the ball.
    pub c_lower: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub c: f64,
    pub per_radius: Vec<RadiusCalibration>,
    /// `max_r c(r) / min_r c(r)`.
    pub spread: f64,
    pub centers: usize,
}

fn unit_box_points(n: usize, count: usize, rng: &mut impl Rng) -> Vec<BoxCoords> {
    let k = 2 * n - 2;
    (0..count)
        .map(|i| {
            let mut p: Vec<f64> = loop {
                let p: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
                if linalg::dot(&p, &p) <= 1.0 && linalg::norm(&p) > 1e-9 {
                    break p;
                }
            };
            let mut s: f64 = rng.random_range(-1.0..=1.0);
            let mut t: f64 = rng.random_range(-1.0..=1.0);
            if i % 2 == 1 {
                // Boundary point: push every coordinate block outward at
                // random, always leaving at least one on its face.
                let mask = 1 + rng.random_range(0..7u32);
                if mask & 1 != 0 {
                    s = s.signum();
                }
                if mask & 2 != 0 {
                    let len = linalg::norm(&p);
                    p.iter_mut().for_each(|v| *v /= len);
                }
                if mask & 4 != 0 {
                    t = t.signum();
                }
            }
            BoxCoords { s, p, t }
        })
        .collect()
}

fn fits(g: &IntrinsicGraph, lo: &[f64], hi: &[f64]) -> bool {
    g.domain().contains(lo) && g.domain().contains(hi)
}

fn lower_holds(g: &IntrinsicGraph, center: &HPoint, r: f64, c: f64, unit: &[BoxCoords]) -> Result<bool> {
    let q = QuasiBox::new(g.w().clone(), center.clone(), r / c)?;
    for u in unit {
        let v = q.push(u);
        let Some(p) = g.graph_point_coords(&v) else { return Ok(false) };
        if center.gauge_dist(&p) > r * (1.0 + 1e-12) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Bisection for the smallest `c ∈ [1, C_MAX]` satisfying the inner
/// inclusion, or `None` if even `C_MAX` fails.
fn lower_constant(g: &IntrinsicGraph, center: &HPoint, r: f64, unit: &[BoxCoords]) -> Result<Option<f64>> {
    if lower_holds(g, center, r, 1.0, unit)? {
        return Ok(Some(1.0));
    }
    if !lower_holds(g, center, r, C_MAX, unit)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (1.0, C_MAX);
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if lower_holds(g, center, r, mid, unit)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

fn pick_centers(g: &IntrinsicGraph, radius: f64, s: &CalibrationSettings) -> Result<Vec<HPoint>> {
    let region = g.domain().shrink(s.center_spread);
    let mut rng = rng::stream(s.seed, &[0xCE, radius.to_bits()]);
    let mut out = Vec::new();
    for _ in 0..1000 * s.centers.max(1) {
        if out.len() == s.centers {
            break;
        }
        let v: Vec<f64> = (0..region.dim()).map(|i| rng.random_range(region.lo[i]..=region.hi[i])).collect();
        let Some(center) = g.graph_point_coords(&v) else { continue };
        let (lo, hi) = proposal_bounds(g, &center, radius);
        let (qlo, qhi) = QuasiBox::new(g.w().clone(), center.clone(), radius)?.bounding_box();
        if fits(g, &lo, &hi) && fits(g, &qlo, &qhi) {
            out.push(center);
        }
    }
    if out.len() < s.centers {
        return Err(HsError::TooFewSamples { got: out.len(), needed: s.centers });
    }
    Ok(out)
}

/// Calibrates `c` on sampled centers at every radius of `settings`. The
/// outer inclusion gives a direct lower bound on `c`; the inner one is
/// monotone in `c` and is bisected.
pub fn calibrate_c(g: &IntrinsicGraph, settings: &CalibrationSettings) -> Result<CalibrationReport> {
    let n = g.n();
    if n < 2 {
        return invalid("quasiboxes need n ≥ 2");
    }
    if settings.radii.is_empty() || settings.centers == 0 || settings.ball_samples == 0 || settings.box_samples == 0 {
        return invalid("calibration needs radii, centers and samples");
    }
    let mut per_radius = Vec::new();
    for (ri, &r) in settings.radii.iter().enumerate() {
        if !(r > 0.0 && r.is_finite()) {
            return invalid("radii must be positive");
        }
        let centers = pick_centers(g, r, settings)?;
        let unit = unit_box_points(n, settings.box_samples, &mut rng::stream(settings.seed, &[0xB0C5, ri as u64]));
        let results: Vec<Result<(f64, Option<f64>)>> = centers
            .par_iter()
            .enumerate()
            .map(|(ci, center)| {
                let mut stream = rng::stream(settings.seed, &[0xBA, ri as u64, ci as u64]);
                let ball = sample_ball(g, center, r, settings.ball_samples, &mut stream);
                let q = QuasiBox::new(g.w().clone(), center.clone(), r)?;
                let upper = ball
                    .points
                    .iter()
                    .map(|p| q.quasi_radius(&project_along(g.w(), p).v0_coords()) / r)
                    .fold(0.0, f64::max);
                Ok((upper, lower_constant(g, center, r, &unit)?))
            })
            .collect();
        let (mut c_upper, mut c_lower) = (0.0f64, 1.0f64);
        for res in results {
            let (u, l) = res?;
            c_upper = c_upper.max(u);
            match l {
                Some(l) => c_lower = c_lower.max(l),
                None => return Err(HsError::Violation(format!("no c ≤ {C_MAX} satisfies the inner inclusion at r = {r}"))),
            }
        }
        let c = c_upper.max(c_lower).max(1.0);
        if c > C_MAX {
            return Err(HsError::Violation(format!("outer inclusion needs c = {c} > {C_MAX} at r = {r}")));
        }
        per_radius.push(RadiusCalibration { r, c, c_upper, c_lower });
    }
    let c = per_radius.iter().map(|p| p.c).fold(1.0, f64::max);
    let cmin = per_radius.iter().map(|p| p.c).fold(f64::INFINITY, f64::min);
    Ok(CalibrationReport { c, spread: c / cmin, per_radius, centers: settings.centers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{default_lambda_prime, vertical_plane_graph};
    use crate::grid::BoxDomain;

    #[test]
    fn flat_plane_matches_the_box_corner_constant() {
        let d = BoxDomain::centered(&[3.0, 3.0, 3.0, 6.0]).unwrap();
        let g = vertical_plane_graph(2, &[0.0; 3], 0.0, d, 8, 0.3, default_lambda_prime(0.3)).unwrap();
        let s = CalibrationSettings { radii: vec![0.5, 1.0], centers: 3, ball_samples: 4000, box_samples: 400, ..Default::default() };
        let rep = calibrate_c(&g, &s).unwrap();
        // Corners of the unit box have gauge (2² + 16)^{1/4}.
        let corner = 20f64.powf(0.25);
        for p in &rep.per_radius {
            assert!((p.c_lower - corner).abs() < 1e-3, "{p:?}");
            assert!(p.c_upper <= 1.0 + 1e-9);
        }
        assert!(rep.spread < 1.001);
    }
}
