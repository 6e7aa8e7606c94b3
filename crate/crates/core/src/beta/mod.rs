//! Vertical-plane beta numbers of intrinsic graphs, quasiboxes, affine and
//! slice-affine fits, and the comparison quantities between parametric and
//! non-parametric flatness.
//!
//! Surface measure on a graph is the push-forward of Lebesgue measure on
//! `V_0` under `v ↦ v · δ_{f(v)}(w)`. The distance from a point to a vertical
//! plane is the horizontal distance `|⟨π(p), ν⟩ − c|`: a vertical plane
//! contains the whole center, so the foot point can always be chosen with a
//! horizontal difference.

mod compare;
mod fit;
mod quasibox;

pub use compare::{
    beta_vs_parametric, lip_of_best_fit, saff_compare, switch_affine, verify_switch, ComparisonSettings,
    LipFitReport, ParametricComparison, PlaneAffine, Quasiball, SaffComparison, SwitchCheck,
};
pub use fit::{
    best_affine_fit, best_affine_fit_with, best_slice_affine_fit, best_slice_affine_fit_with, AffineFit,
    AffineFunction, Field, FnField, Quadrature, SliceAffineFit, SliceFit,
};
pub use quasibox::{BoxCoords, BoxFrame, Lattice, QuasiBox};
pub(crate) use fit::fit_columns;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, HsError, Result};
use crate::graphs::IntrinsicGraph;
use crate::heisenberg::{a0_coords, project_along, HPoint};
use crate::linalg;
use crate::rng;

/// `π⁻¹({u : ⟨u, normal⟩ = offset})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerticalPlane {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl VerticalPlane {
    /// Normalizes `normal` (length `2n`) and scales `offset` accordingly.
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let nn = linalg::norm(&normal);
        if normal.is_empty() || !normal.len().is_multiple_of(2) {
            return invalid("plane normal must have even length 2n");
        }
        if !(nn > 0.0 && nn.is_finite() && offset.is_finite()) {
            return invalid("plane normal must be finite and nonzero");
        }
        Ok(VerticalPlane { normal: linalg::scaled(1.0 / nn, &normal), offset: offset / nn })
    }

    /// The plane `δ_t(L)`.
    pub fn dilate(&self, t: f64) -> Self {
        VerticalPlane { normal: self.normal.clone(), offset: self.offset * t }
    }
}

/// Gauge distance from `p` to the vertical plane `L`.
pub fn dist_to_vertical_plane(p: &HPoint, plane: &VerticalPlane) -> f64 {
    (linalg::dot(&p.project_pi(), &plane.normal) - plane.offset).abs()
}

/// Monte Carlo estimate of `β_Γ(x, r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub value: f64,
    pub best_plane: VerticalPlane,
    /// Accepted samples, i.e. proposals landing in `B(x, r) ∩ Γ`.
    pub sample_count: usize,
    pub stderr: f64,
    pub proposals: usize,
    /// Proposals whose parameter fell outside the graph's domain.
    pub clipped: usize,
    /// Estimated surface measure of `B(x, r) ∩ Γ` and its standard error.
    pub measure: f64,
    pub measure_stderr: f64,
}

/// Serialized form of one beta evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaRecord {
    pub x: HPoint,
    pub r: f64,
    pub beta: f64,
    pub stderr: f64,
    pub plane: VerticalPlane,
    pub samples: usize,
}

impl BetaEstimate {
    pub fn record(&self, x: &HPoint, r: f64) -> BetaRecord {
        BetaRecord {
            x: x.clone(),
            r,
            beta: self.value,
            stderr: self.stderr,
            plane: self.best_plane.clone(),
            samples: self.sample_count,
        }
    }
}

/// Fewest accepted samples for which a beta number is reported.
pub const MIN_BALL_SAMPLES: usize = 64;

/// Relative tolerance below which a point must lie on the graph.
const ON_GRAPH_TOL: f64 = 1e-8;

/// Uniform proposals over a box of `V_0` whose image covers the surface
/// ball, with rejection by gauge distance.
#[derive(Clone, Debug)]
pub struct BallSample {
    pub points: Vec<HPoint>,
    /// Index of every proposal's accepted point, `None` if rejected.
    pub accepted: Vec<Option<usize>>,
    pub clipped: usize,
    /// Lebesgue measure of the proposal region.
    pub proposal_volume: f64,
}

impl BallSample {
    pub fn proposals(&self) -> usize {
        self.accepted.len()
    }

    /// Estimated measure of `B(x, r) ∩ Γ` and its standard error.
    pub fn measure(&self) -> (f64, f64) {
        let n = self.proposals() as f64;
        let p = self.points.len() as f64 / n;
        (self.proposal_volume * p, self.proposal_volume * (p * (1.0 - p) / n).sqrt())
    }
}

/// Half-widths of a box of `V_0` containing `Π_w(B(0, 1))`, in `V_0` coordinates.
fn unit_proposal_box(g: &IntrinsicGraph) -> Vec<f64> {
    let w = g.w().horizontal();
    let mut half: Vec<f64> = a0_coords(&w).iter().map(|c| 1.0 + c.abs()).collect();
    half.push(0.25 + 0.5 * linalg::norm(&w));
    half
}

/// Coordinate bounds `(lo, hi)` of the proposal region `Π_w(x · δ_r(U))`
/// used by [`sample_ball`]. If they lie inside the graph's box, no proposal
/// is clipped.
pub fn proposal_bounds(g: &IntrinsicGraph, x: &HPoint, r: f64) -> (Vec<f64>, Vec<f64>) {
    let half = unit_proposal_box(g);
    let map = |u: &[f64]| project_along(g.w(), &(x * &HPoint::from_v0_coords(u).dilate(r))).v0_coords();
    let d = half.len();
    let origin = map(&vec![0.0; d]);
    let mut spread = vec![0.0; d];
    for (j, hj) in half.iter().enumerate() {
        let col = map(&linalg::unit(d, j));
        for (s, (c, o)) in spread.iter_mut().zip(col.iter().zip(&origin)) {
            *s += (c - o).abs() * hj;
        }
    }
    let lo = origin.iter().zip(&spread).map(|(o, s)| o - s).collect();
    let hi = origin.iter().zip(&spread).map(|(o, s)| o + s).collect();
    (lo, hi)
}

/// Draws `proposals` uniform points of `Π_w(x · δ_r(U))` for the box `U` of
/// [`unit_proposal_box`] and keeps those whose graph point lies in `B(x, r)`.
/// The map `u ↦ Π_w(x · u)` preserves Lebesgue measure on `V_0`.
pub fn sample_ball(g: &IntrinsicGraph, x: &HPoint, r: f64, proposals: usize, rng: &mut impl Rng) -> BallSample {
    let n = g.n();
    let half = unit_proposal_box(g);
    let mut points = Vec::new();
    let mut accepted = Vec::with_capacity(proposals);
    let mut clipped = 0;
    let mut u = vec![0.0; 2 * n];
    for _ in 0..proposals {
        for (ui, hi) in u.iter_mut().zip(&half) {
            *ui = rng.random_range(-*hi..=*hi);
        }
        let step = HPoint::from_v0_coords(&u).dilate(r);
        let v = project_along(g.w(), &(x * &step)).v0_coords();
        match g.graph_point_coords(&v) {
            None => {
                clipped += 1;
                accepted.push(None);
            }
            Some(p) if x.gauge_dist(&p) <= r => {
                accepted.push(Some(points.len()));
                points.push(p);
            }
            Some(_) => accepted.push(None),
        }
    }
    let volume = half.iter().map(|h| 2.0 * h).product::<f64>() * r.powi(2 * n as i32 + 1);
    BallSample { points, accepted, clipped, proposal_volume: volume }
}

/// Total least squares plane through horizontal projections: the smallest
/// eigenvector of the centred second-moment matrix. Returns the plane and
/// whether the points are (numerically) contained in it.
pub(crate) fn tls_plane(points: &[Vec<f64>]) -> (VerticalPlane, bool) {
    let d = points[0].len();
    let m = points.len() as f64;
    let mut mean = vec![0.0; d];
    for p in points {
        linalg::axpy(1.0 / m, p, &mut mean);
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for p in points {
        for i in 0..d {
            let di = p[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (p[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    let eig = SymmetricEigen::new(cov);
    let (imin, lmin) = eig
        .eigenvalues
        .iter()
        .cloned()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("d ≥ 2");
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let normal: Vec<f64> = eig.eigenvectors.column(imin).iter().cloned().collect();
    let offset = linalg::dot(&normal, &mean);
    let degenerate = lmin <= 1e-20 * lmax;
    (VerticalPlane::new(normal, offset).expect("unit eigenvector"), degenerate)
}

/// `β_Γ(x, r) = inf_L (r^{−2n−1} ∫_{B(x,r)∩Γ} (d(y, L)/r)² dμ(y))^{1/2}`.
///
/// `samples` is the number of proposals; at least [`MIN_BALL_SAMPLES`] of
/// them must land in the ball. The stream is keyed on `seed` only.
pub fn beta_number(g: &IntrinsicGraph, x: &HPoint, r: f64, samples: usize, seed: u64) -> Result<BetaEstimate> {
    if x.n() != g.n() {
        return Err(HsError::DimensionMismatch { expected: g.n(), found: x.n() });
    }
    if !(r > 0.0 && r.is_finite()) {
        return invalid("radius must be positive");
    }
    let gap = g.gap(x)?;
    if gap > ON_GRAPH_TOL * (1.0 + x.gauge_norm()) {
        return Err(HsError::NotOnGraph { gap });
    }
    let mut rng = rng::stream(seed, &[]);
    let ball = sample_ball(g, x, r, samples, &mut rng);
    if ball.points.len() < MIN_BALL_SAMPLES {
        return Err(HsError::TooFewSamples { got: ball.points.len(), needed: MIN_BALL_SAMPLES });
    }
    let horizontal: Vec<Vec<f64>> = ball.points.iter().map(HPoint::project_pi).collect();
    let (plane, degenerate) = tls_plane(&horizontal);
    let (measure, measure_stderr) = ball.measure();
    let base = BetaEstimate {
        value: 0.0,
        best_plane: plane.clone(),
        sample_count: ball.points.len(),
        stderr: 0.0,
        proposals: samples,
        clipped: ball.clipped,
        measure,
        measure_stderr,
    };
    if degenerate {
        return Ok(base);
    }
    // β² = r^{−2n−3} · V · E[1_accept · dist²] over the proposal distribution.
    let scale = ball.proposal_volume * r.powi(-(2 * g.n() as i32) - 3);
    let nprop = samples as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for p in &ball.points {
        let d = dist_to_vertical_plane(p, &plane);
        let x2 = d * d;
        s1 += x2;
        s2 += x2 * x2;
    }
    let mean = s1 / nprop;
    let var = (s2 / nprop - mean * mean).max(0.0) * nprop / (nprop - 1.0);
    let beta2 = scale * mean;
    let se2 = scale * (var / nprop).sqrt();
    let value = beta2.sqrt();
    let stderr = if value > 0.0 { (se2 / (2.0 * value)).min(se2.sqrt()) } else { se2.sqrt() };
    Ok(BetaEstimate { value, stderr, ..base })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{make_family, vertical_plane_graph, Family, GraphFamilySpec};
    use crate::grid::BoxDomain;

    #[test]
    fn distance_examples() {
        let plane = VerticalPlane::new(vec![1.0, 0.0], 0.0).unwrap();
        let p = HPoint::new(vec![3.0], vec![0.0], 7.0).unwrap();
        assert_eq!(dist_to_vertical_plane(&p, &plane), 3.0);
        let q = HPoint::new(vec![0.0], vec![5.0], -2.0).unwrap();
        assert_eq!(dist_to_vertical_plane(&q, &plane), 0.0);
        let d2 = dist_to_vertical_plane(&p.dilate(2.0), &plane.dilate(2.0));
        assert_eq!(d2, 6.0);
    }

    #[test]
    fn planes_have_zero_beta() {
        let dom = BoxDomain::centered(&[3.0, 3.0, 3.0, 6.0]).unwrap();
        let g = vertical_plane_graph(2, &[0.1, -0.2, 0.15], 0.3, dom, 16, 0.3, 0.7).unwrap();
        let x = g.graph_point_coords(&[0.1, 0.2, -0.1, 0.3]).unwrap();
        let b = beta_number(&g, &x, 0.7, 2000, 5).unwrap();
        assert!(b.value <= 3.0 * b.stderr + 1e-12, "{b:?}");
    }

    #[test]
    fn beta_is_dilation_invariant_for_a_bump() {
        let spec = GraphFamilySpec::new(Family::SmoothBump, 2, 0.3, 3, 16);
        let g = make_family(&spec).unwrap();
        let x = g.graph_point_coords(&[0.2, -0.1, 0.3, 0.1]).unwrap();
        let b1 = beta_number(&g, &x, 0.8, 4000, 9).unwrap();
        let g2 = g.dilate(2.0).unwrap();
        let b2 = beta_number(&g2, &x.dilate(2.0), 1.6, 4000, 9).unwrap();
        assert!(b1.value > 0.0);
        let tol = 2.0 * (b1.stderr.powi(2) + b2.stderr.powi(2)).sqrt();
        assert!((b1.value - b2.value).abs() <= tol, "{} vs {}", b1.value, b2.value);
    }
}
