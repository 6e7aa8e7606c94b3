//! Intrinsic Lipschitz graphs `Γ = {v · δ_{f(v)}(w) : v ∈ V_0}`.
//!
//! The parametrizing function `f` is stored on a cell-midpoint grid over a
//! box of `V_0` in the coordinates `[x_1..x_n, y_1..y_{n−1}, z]` and is
//! evaluated by multilinear interpolation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, HsError, Result};
use crate::grid::{self, BoxDomain, DyadicGrid, ScalarGrid};
use crate::heisenberg::{cone_contains, plane_p_w, project_along, HPoint, HorizontalDirection};
use crate::linalg;
use crate::rng;

/// Cone parameter used for `w` when none is given: `(1+λ)/2 + (1−λ)/10`.
pub fn default_lambda_prime(lambda: f64) -> f64 {
    (1.0 + lambda) / 2.0 + 0.1 * (1.0 - lambda)
}

/// Lipschitz constant of `f` restricted to `P_w`-cosets, `λλ'/(λ'−λ)`.
pub fn slice_lipschitz_constant(lambda: f64, lambda_prime: f64) -> f64 {
    lambda * lambda_prime / (lambda_prime - lambda)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntrinsicGraph {
    w: HorizontalDirection,
    f: ScalarGrid,
    lambda: f64,
    lambda_prime: f64,
}

/// Header of the graph container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphHeader {
    pub kind: String,
    pub n: usize,
    /// Horizontal part of `w` as `[x.., y..]`.
    pub w: Vec<f64>,
    pub lambda: f64,
    pub lambda_prime: f64,
    #[serde(rename = "box")]
    pub domain: BoxDomain,
    pub resolution: usize,
}

const GRAPH_KIND: &str = "intrinsic-graph";

impl IntrinsicGraph {
    pub fn new(w: HorizontalDirection, f: ScalarGrid, lambda: f64, lambda_prime: f64) -> Result<Self> {
        let n = w.n();
        if n > MAX_N {
            return invalid(format!("graphs are supported for n ≤ {MAX_N}"));
        }
        if f.grid.dim() != 2 * n {
            return Err(HsError::DimensionMismatch { expected: 2 * n, found: f.grid.dim() });
        }
        if !(lambda > 0.0 && lambda < lambda_prime && lambda_prime < 1.0) {
            return invalid(format!("need 0 < λ < λ' < 1, got λ = {lambda}, λ' = {lambda_prime}"));
        }
        if !cone_contains(lambda_prime, w.point())? {
            return invalid("direction w is not in the cone of parameter λ'");
        }
        Ok(IntrinsicGraph { w, f, lambda, lambda_prime })
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn w(&self) -> &HorizontalDirection {
        &self.w
    }

    pub fn f(&self) -> &ScalarGrid {
        &self.f
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambda_prime(&self) -> f64 {
        self.lambda_prime
    }

    pub fn domain(&self) -> &BoxDomain {
        self.f.domain()
    }

    /// `f` at a point given in `V_0` coordinates.
    pub fn f_at(&self, coords: &[f64]) -> Option<f64> {
        self.f.eval(coords)
    }

    /// `f(v)` for `v ∈ V_0`.
    pub fn eval_f(&self, v: &HPoint) -> Result<f64> {
        check_in_v0(v, self.n())?;
        self.f.eval(&v.v0_coords()).ok_or(HsError::OutOfDomain)
    }

    /// `Ψ(v) = v · δ_{f(v)}(w)`.
    pub fn graph_point(&self, v: &HPoint) -> Result<HPoint> {
        let t = self.eval_f(v)?;
        Ok(v * &self.w.power(t))
    }

    /// `Ψ` at a point given in `V_0` coordinates.
    pub fn graph_point_coords(&self, coords: &[f64]) -> Option<HPoint> {
        let t = self.f.eval(coords)?;
        Some(lift(&self.w, coords, t))
    }

    /// Vertical gap `|y_n(p) − f(Π_w(p))|`; zero exactly on the graph.
    pub fn gap(&self, p: &HPoint) -> Result<f64> {
        let v = project_along(&self.w, p);
        Ok((p.y_n() - self.eval_f(&v)?).abs())
    }

    /// The graph `δ_t Γ` for `t > 0`, represented on the dilated box.
    pub fn dilate(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return invalid("dilation factor must be positive");
        }
        let d = self.f.grid.dim();
        let factors: Vec<f64> = (0..d).map(|i| if i == d - 1 { t * t } else { t }).collect();
        let grid = DyadicGrid::new(self.domain().scale_axes(&factors), self.f.grid.resolution)?;
        let f = ScalarGrid::new(grid, self.f.values.iter().map(|v| v * t).collect())?;
        Ok(IntrinsicGraph { f, ..self.clone() })
    }

    pub fn header(&self) -> GraphHeader {
        GraphHeader {
            kind: GRAPH_KIND.into(),
            n: self.n(),
            w: self.w.horizontal(),
            lambda: self.lambda,
            lambda_prime: self.lambda_prime,
            domain: self.domain().clone(),
            resolution: self.f.grid.resolution,
        }
    }

    pub fn write_binary(&self, out: impl std::io::Write) -> Result<()> {
        grid::write_container(out, &self.header(), &self.f.values)
    }

    pub fn read_binary(input: impl std::io::Read) -> Result<Self> {
        let (h, v): (GraphHeader, Vec<f64>) = grid::read_container(input)?;
        Self::from_parts(h, v)
    }

    pub fn to_json(&self) -> Result<String> {
        grid::container_to_json(&self.header(), &self.f.values)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let (h, v): (GraphHeader, Vec<f64>) = grid::container_from_json(text)?;
        Self::from_parts(h, v)
    }

    fn from_parts(h: GraphHeader, values: Vec<f64>) -> Result<Self> {
        if h.kind != GRAPH_KIND {
            return Err(HsError::Format(format!("expected a {GRAPH_KIND} container, found {}", h.kind)));
        }
        if h.w.len() != 2 * h.n || h.domain.dim() != 2 * h.n {
            return Err(HsError::Format("header dimensions disagree with n".into()));
        }
        let w = HorizontalDirection::from_horizontal(&h.w)?;
        let f = ScalarGrid::new(DyadicGrid::new(h.domain, h.resolution)?, values)?;
        Self::new(w, f, h.lambda, h.lambda_prime)
    }
}

fn check_in_v0(v: &HPoint, n: usize) -> Result<()> {
    if v.n() != n {
        return Err(HsError::DimensionMismatch { expected: n, found: v.n() });
    }
    if v.y_n() != 0.0 {
        return invalid("point is not in V_0 (y_n ≠ 0)");
    }
    Ok(())
}

/// `v · δ_t(w)` with `v` given in `V_0` coordinates.
pub(crate) fn lift(w: &HorizontalDirection, coords: &[f64], t: f64) -> HPoint {
    let v = HPoint::from_v0_coords(coords);
    let wp = w.point();
    let mut out = v.clone();
    for i in 0..v.n() {
        out.x[i] += t * wp.x[i];
        out.y[i] += t * wp.y[i];
    }
    out.z += 0.5 * t * v.omega_bar(wp);
    out
}

/// Outcome of [`check_cone_condition`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub passed: bool,
    /// Largest sampled `|y_n(h)| / ‖h‖` with `h = Ψ(u)⁻¹Ψ(v)`.
    pub worst_ratio: f64,
    pub threshold: f64,
    pub trials: usize,
}

/// Samples a pair of points of the box in normalized coordinates. Half of
/// the pairs are independent uniform points; the rest are local pairs whose
/// horizontal offset has log-uniform size and whose vertical offset has the
/// matching parabolic size.
fn sample_pair<R: Rng>(rng: &mut R, domain: &BoxDomain, cells: usize) -> (Vec<f64>, Vec<f64>) {
    let d = domain.dim();
    let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let v: Vec<f64> = if rng.random::<bool>() {
        (0..d).map(|_| rng.random::<f64>()).collect()
    } else {
        let lo = (0.25 / cells as f64).ln();
        let rho = (lo + (0.0 - lo) * rng.random::<f64>()).exp();
        let dir: Vec<f64> = (0..d - 1).map(|_| StandardNormal.sample(rng)).collect();
        let dn = linalg::norm(&dir).max(1e-300);
        let wh = (0..d - 1).map(|i| domain.width(i)).sum::<f64>() / (d - 1) as f64;
        let parabolic = wh * wh / domain.width(d - 1);
        let mut v = u.clone();
        for i in 0..d - 1 {
            v[i] += rho * dir[i] / dn;
        }
        v[d - 1] += rho * rho * parabolic * (2.0 * rng.random::<f64>() - 1.0);
        v.iter().map(|c| c.clamp(0.0, 1.0)).collect()
    };
    (u, v)
}

fn denormalize(domain: &BoxDomain, u: &[f64]) -> Vec<f64> {
    (0..domain.dim()).map(|i| domain.lo[i] + u[i] * domain.width(i)).collect()
}

/// Horizontal part and height of a graph point, on the stack.
#[derive(Clone, Copy)]
struct Lifted {
    h: [f64; 2 * MAX_N],
    z: f64,
}

const MAX_N: usize = 8;

impl Lifted {
    /// `v · δ_t(w)` for `v` in `V_0` coordinates.
    fn new(w: &[f64], c: &[f64], t: f64) -> Self {
        let n = w.len() / 2;
        let mut v = [0.0; 2 * MAX_N];
        v[..2 * n - 1].copy_from_slice(&c[..2 * n - 1]);
        let mut h = [0.0; 2 * MAX_N];
        for i in 0..2 * n {
            h[i] = v[i] + t * w[i];
        }
        let z = c[2 * n - 1] + 0.5 * t * crate::heisenberg::omega(&v[..2 * n], w);
        Lifted { h, z }
    }

    /// `|y_n(h)| / ‖h‖` for `h = self⁻¹ · other`, and the height of `h`.
    fn quotient(&self, other: &Self, n: usize) -> (f64, f64, f64) {
        let a = &self.h[..2 * n];
        let b = &other.h[..2 * n];
        let zh = other.z - self.z - 0.5 * crate::heisenberg::omega(a, b);
        let h2: f64 = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum();
        let norm = (h2 * h2 + 16.0 * zh * zh).sqrt().sqrt();
        ((b[2 * n - 1] - a[2 * n - 1]).abs(), norm, zh)
    }
}

/// Ratio `|y_n(h)|/‖h‖` for `h = Ψ(u)⁻¹Ψ(v)`. With `flatten`, the height of
/// `v` is first adjusted so that `h` is (nearly) horizontal, which minimizes
/// `‖h‖` for the given horizontal step. `None` if a point leaves the box or
/// the pair is degenerate.
fn pair_ratio(g: &IntrinsicGraph, w: &[f64], pu: &[f64], pv: &mut [f64], flatten: bool) -> Option<f64> {
    let n = g.n();
    let a = Lifted::new(w, pu, g.f.eval(pu)?);
    let mut b = Lifted::new(w, pv, g.f.eval(pv)?);
    if flatten {
        for _ in 0..3 {
            let (_, _, zh) = a.quotient(&b, n);
            pv[2 * n - 1] -= zh;
            b = Lifted::new(w, pv, g.f.eval(pv)?);
        }
    }
    let (num, norm, _) = a.quotient(&b, n);
    let scale = 1.0 + a.h.iter().map(|v| v.abs()).sum::<f64>() + a.z.abs();
    (norm > 1e-14 * scale).then(|| num / norm)
}

/// Largest number of interpolation cells visited by the deterministic sweep.
const SWEEP_CELLS: usize = 200_000;

/// Deterministic sweep over interpolation cells, including the boundary
/// half-cells where `f` is extrapolated. At the centre of each cell it
/// compares flattened pairs along every horizontal axis and along the
/// estimated gradient. For piecewise multilinear `f` this captures the
/// steepest local slopes, which random pairs hit only rarely.
fn cell_sweep_ratio(g: &IntrinsicGraph) -> f64 {
    let grid = &g.f.grid;
    let d = grid.dim();
    let w = g.w.horizontal();
    let per_axis = grid.resolution + 1;
    let total = per_axis.pow(d as u32);
    let stride = total.div_ceil(SWEEP_CELLS).max(1);
    let center = |a: usize, i: usize| -> (f64, f64) {
        let h = grid.spacing(a);
        if i == 0 {
            (grid.domain.lo[a] + 0.25 * h, 0.25 * h)
        } else if i == per_axis - 1 {
            (grid.domain.hi[a] - 0.25 * h, 0.25 * h)
        } else {
            (grid.node_coord(a, i - 1) + 0.5 * h, 0.5 * h)
        }
    };
    (0..total.div_ceil(stride))
        .into_par_iter()
        .map(|k| {
            let mut rest = k * stride;
            let mut c = [0.0; 2 * MAX_N];
            let mut half = [0.0; 2 * MAX_N];
            for a in (0..d).rev() {
                (c[a], half[a]) = center(a, rest % per_axis);
                rest /= per_axis;
            }
            let c = &c[..d];
            let mut worst: f64 = 0.0;
            let mut grad = [0.0; 2 * MAX_N];
            for a in 0..d - 1 {
                let mut pu = [0.0; 2 * MAX_N];
                pu[..d].copy_from_slice(c);
                let mut pv = pu;
                pu[a] -= half[a];
                pv[a] += half[a];
                if let (Some(fu), Some(fv)) = (g.f.eval(&pu[..d]), g.f.eval(&pv[..d])) {
                    grad[a] = (fv - fu) / (2.0 * half[a]);
                }
                if let Some(r) = pair_ratio(g, &w, &pu[..d], &mut pv[..d], true) {
                    worst = worst.max(r);
                }
            }
            let gn = grad[..d - 1].iter().map(|v| v * v).sum::<f64>().sqrt();
            if gn > 0.0 {
                let step = half[..d - 1].iter().cloned().fold(f64::INFINITY, f64::min);
                let mut pu = [0.0; 2 * MAX_N];
                pu[..d].copy_from_slice(c);
                let mut pv = pu;
                for a in 0..d - 1 {
                    pu[a] -= step * grad[a] / gn;
                    pv[a] += step * grad[a] / gn;
                }
                if let Some(r) = pair_ratio(g, &w, &pu[..d], &mut pv[..d], true) {
                    worst = worst.max(r);
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Samples pairs of graph points and reports the worst cone ratio
/// `|y_n(h)|/‖h‖` with `h = Ψ(u)⁻¹Ψ(v)`. The check passes iff the worst ratio
/// is at most `slack · λ`.
///
/// Two kinds of pairs are used: a deterministic sweep over the cells of the
/// grid (see `cell_sweep_ratio`), and `trials` random pairs, every third of
/// which is flattened so that `h` is horizontal.
pub fn check_cone_condition_with(g: &IntrinsicGraph, trials: usize, seed: u64, slack: f64) -> Result<ConeReport> {
    if trials == 0 {
        return invalid("cone check needs at least one trial");
    }
    let domain = g.domain();
    let mut rng = rng::stream(seed, &[0xC0E]);
    let w = g.w.horizontal();
    let mut worst = cell_sweep_ratio(g);
    for trial in 0..trials {
        let (u, v) = sample_pair(&mut rng, domain, g.f.grid.resolution);
        let pu = denormalize(domain, &u);
        let mut pv = denormalize(domain, &v);
        if let Some(r) = pair_ratio(g, &w, &pu, &mut pv, trial % 3 == 2) {
            worst = worst.max(r);
        }
    }
    let threshold = slack * g.lambda;
    Ok(ConeReport { passed: worst <= threshold, worst_ratio: worst, threshold, trials })
}

pub fn check_cone_condition(g: &IntrinsicGraph, trials: usize, seed: u64) -> Result<ConeReport> {
    check_cone_condition_with(g, trials, seed, 1.0)
}

/// Finds `t` with `f(Π_w(v'·δ_t(w'))) = t` by bisection on `[lo, hi]`.
fn solve_height(g: &IntrinsicGraph, w_new: &HorizontalDirection, coords: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let residual = |t: f64| -> Option<f64> {
        let q = lift(w_new, coords, t);
        let v = project_along(&g.w, &q);
        Some(g.f.eval(&v.v0_coords())? - t)
    };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (residual(a)?, residual(b)?);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    while b - a > 1e-10 {
        let m = 0.5 * (a + b);
        let fm = residual(m)?;
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Reparametrizes `Γ` along `w'` on an explicit output grid.
///
/// Each node `v'` gets `f'(v') = t` where `v'·δ_t(w') ∈ Γ`. The residual
/// `t ↦ f(Π_w(v'·δ_t(w'))) − t` is strictly decreasing, and every root lies in
/// the range of `f`, which brackets the bisection. Nodes whose bisection
/// leaves the box of `f` are reported as clipped.
pub fn reparametrize_on(g: &IntrinsicGraph, w_new: &HorizontalDirection, out: DyadicGrid) -> Result<IntrinsicGraph> {
    if w_new.n() != g.n() || out.dim() != 2 * g.n() {
        return Err(HsError::DimensionMismatch { expected: g.n(), found: w_new.n() });
    }
    if !cone_contains(g.lambda_prime, w_new.point())? {
        return invalid("new direction is not in the cone of parameter λ'");
    }
    let (lo, hi) = (g.f.min() - 1e-9, g.f.max() + 1e-9);
    let values: Vec<Option<f64>> = (0..out.node_count())
        .into_par_iter()
        .map(|i| solve_height(g, w_new, &out.node(i), lo, hi))
        .collect();
    let clipped = values.iter().filter(|v| v.is_none()).count();
    if clipped > 0 {
        return Err(HsError::DomainClipped { nodes: clipped });
    }
    let f = ScalarGrid::new(out, values.into_iter().map(|v| v.expect("checked")).collect())?;
    IntrinsicGraph::new(w_new.clone(), f, g.lambda, g.lambda_prime)
}

/// Reparametrizes on the largest shrunken copy of the original box (factor
/// 0.9 per attempt, at most 20 attempts) that avoids clipping.
pub fn reparametrize(g: &IntrinsicGraph, w_new: &HorizontalDirection) -> Result<IntrinsicGraph> {
    let mut domain = g.domain().clone();
    let mut last = HsError::DomainClipped { nodes: 0 };
    for _ in 0..20 {
        match reparametrize_on(g, w_new, DyadicGrid::new(domain.clone(), g.f.grid.resolution)?) {
            Ok(r) => return Ok(r),
            Err(e @ HsError::DomainClipped { .. }) => last = e,
            Err(e) => return Err(e),
        }
        domain = domain.shrink(0.9);
    }
    Err(last)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceLipReport {
    pub max_quotient: f64,
    /// `λλ'/(λ'−λ)` for the graph's parameters.
    pub bound: f64,
    pub slack: f64,
    pub pairs: usize,
    pub passed: bool,
}

/// Largest sampled difference quotient of `f` on the coset `g·P_w`, compared
/// against `slack · λλ'/(λ'−λ)`.
pub fn slice_lipschitz_bound_with(
    gr: &IntrinsicGraph,
    g: &HPoint,
    trials: usize,
    seed: u64,
    slack: f64,
) -> Result<SliceLipReport> {
    let n = gr.n();
    check_in_v0(g, n)?;
    let domain = gr.domain();
    let basis = plane_p_w(&gr.w).horizontal_basis();
    let hmax = (0..2 * n - 1).map(|i| domain.lo[i].abs().max(domain.hi[i].abs())).fold(0.0, f64::max);
    let zspan = domain.lo[2 * n - 1].abs().max(domain.hi[2 * n - 1].abs());
    let g_h = g.project_pi();
    let point = |a: &[f64], t: f64| -> Vec<f64> {
        let mut h = g_h.clone();
        for (ai, b) in a.iter().zip(&basis) {
            linalg::axpy(*ai, b, &mut h);
        }
        let offset: Vec<f64> = h.iter().zip(&g_h).map(|(x, y)| x - y).collect();
        let z = g.z + t + 0.5 * crate::heisenberg::omega(&g_h, &offset);
        HPoint::from_horizontal(&h, z).v0_coords()
    };
    let mut rng = rng::stream(seed, &[0x511CE]);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    let max_attempts = trials.saturating_mul(200).max(1000);
    let mut attempts = 0;
    while pairs < trials && attempts < max_attempts {
        attempts += 1;
        let a: Vec<f64> = basis.iter().map(|_| hmax * (2.0 * rng.random::<f64>() - 1.0)).collect();
        let t = 2.0 * zspan * (2.0 * rng.random::<f64>() - 1.0);
        let (b, s) = if rng.random::<bool>() {
            let b: Vec<f64> = basis.iter().map(|_| hmax * (2.0 * rng.random::<f64>() - 1.0)).collect();
            (b, 2.0 * zspan * (2.0 * rng.random::<f64>() - 1.0))
        } else {
            let rho = hmax * (1e-3f64.ln() * rng.random::<f64>()).exp();
            let b: Vec<f64> = a.iter().map(|ai| ai + rho * (2.0 * rng.random::<f64>() - 1.0)).collect();
            (b, t + rho * rho * (2.0 * rng.random::<f64>() - 1.0))
        };
        let (pu, pv) = (point(&a, t), point(&b, s));
        let (Some(fu), Some(fv)) = (gr.f.eval(&pu), gr.f.eval(&pv)) else { continue };
        let d = HPoint::from_v0_coords(&pu).gauge_dist(&HPoint::from_v0_coords(&pv));
        if d <= 1e-12 {
            continue;
        }
        pairs += 1;
        worst = worst.max((fu - fv).abs() / d);
    }
    if pairs == 0 {
        return invalid("the slice does not meet the domain");
    }
    let bound = slice_lipschitz_constant(gr.lambda, gr.lambda_prime);
    Ok(SliceLipReport { max_quotient: worst, bound, slack, pairs, passed: worst <= slack * bound })
}

pub fn slice_lipschitz_bound(gr: &IntrinsicGraph, g: &HPoint, trials: usize, seed: u64) -> Result<SliceLipReport> {
    slice_lipschitz_bound_with(gr, g, trials, seed, 2.0)
}

/// Test graph families, all with direction `w = Y_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    VerticalPlane,
    SmoothBump,
    RandomLipschitz,
}

impl std::str::FromStr for Family {
    type Err = HsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vertical-plane" => Ok(Family::VerticalPlane),
            "smooth-bump" => Ok(Family::SmoothBump),
            "random-lipschitz" => Ok(Family::RandomLipschitz),
            other => invalid(format!("unknown family {other}")),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::VerticalPlane => "vertical-plane",
            Family::SmoothBump => "smooth-bump",
            Family::RandomLipschitz => "random-lipschitz",
        })
    }
}

fn default_scale() -> f64 {
    0.9
}
fn default_half_width() -> f64 {
    2.5
}
fn default_half_height() -> f64 {
    4.0
}
fn default_bump_width() -> f64 {
    1.0
}
fn default_octaves() -> usize {
    3
}

/// Recipe for a test graph. Optional fields fall back to defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFamilySpec {
    pub family: Family,
    pub n: usize,
    pub lambda: f64,
    pub seed: u64,
    pub resolution: usize,
    /// Cone parameter of `w`; defaults to [`default_lambda_prime`].
    #[serde(default)]
    pub lambda_prime: Option<f64>,
    /// Fraction of the largest admissible amplitude actually used.
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Half-width of the box along the horizontal `V_0` axes.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    /// Half-width of the box along `z`.
    #[serde(default = "default_half_height")]
    pub half_height: f64,
    /// Width `σ` of the smooth bump in gauge units.
    #[serde(default = "default_bump_width")]
    pub bump_width: f64,
    /// Number of dyadic levels of random grid values summed by the
    /// random-lipschitz family.
    #[serde(default = "default_octaves")]
    pub octaves: usize,
}

impl GraphFamilySpec {
    pub fn new(family: Family, n: usize, lambda: f64, seed: u64, resolution: usize) -> Self {
        GraphFamilySpec {
            family,
            n,
            lambda,
            seed,
            resolution,
            lambda_prime: None,
            scale: default_scale(),
            half_width: default_half_width(),
            half_height: default_half_height(),
            bump_width: default_bump_width(),
            octaves: default_octaves(),
        }
    }

    pub fn lambda_prime(&self) -> f64 {
        self.lambda_prime.unwrap_or_else(|| default_lambda_prime(self.lambda))
    }

    pub fn domain(&self) -> Result<BoxDomain> {
        let mut half = vec![self.half_width; 2 * self.n];
        half[2 * self.n - 1] = self.half_height;
        BoxDomain::centered(&half)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("n must be at least 1");
        }
        if self.resolution < 8 || !self.resolution.is_power_of_two() {
            return invalid("resolution must be a power of two ≥ 8");
        }
        if !(self.scale >= 0.0 && self.scale <= 1.0) {
            return invalid("scale must lie in [0, 1]");
        }
        if !(self.bump_width > 0.0) || self.octaves == 0 {
            return invalid("bump width and octave count must be positive");
        }
        Ok(())
    }
}

const FAMILY_CHECK_TRIALS: usize = 10_000;

/// The vertical plane `Γ_{T, Y_n}` for the affine function
/// `T(v) = constant + ⟨slope, (x_1..x_n, y_1..y_{n−1})⟩`.
pub fn vertical_plane_graph(
    n: usize,
    slope: &[f64],
    constant: f64,
    domain: BoxDomain,
    resolution: usize,
    lambda: f64,
    lambda_prime: f64,
) -> Result<IntrinsicGraph> {
    if slope.len() != 2 * n - 1 || domain.dim() != 2 * n {
        return Err(HsError::DimensionMismatch { expected: 2 * n - 1, found: slope.len() });
    }
    let grid = DyadicGrid::new(domain, resolution)?;
    let f = ScalarGrid::from_fn(grid, |c| constant + linalg::dot(&c[..2 * n - 1], slope))?;
    IntrinsicGraph::new(HorizontalDirection::y_n(n), f, lambda, lambda_prime)
}

/// Steepest difference quotient of `f` between grid neighbours along the
/// `V_0` axes other than `z`.
fn max_edge_slope(f: &ScalarGrid) -> f64 {
    let grid = &f.grid;
    let d = grid.dim();
    let mut worst: f64 = 0.0;
    for i in 0..grid.node_count() {
        let idx = grid.multi_index(i);
        for a in 0..d - 1 {
            if idx[a] + 1 < grid.resolution {
                let mut next = idx.clone();
                next[a] += 1;
                let diff = f.values[grid.flat_index(&next)] - f.values[i];
                worst = worst.max(diff.abs() / grid.spacing(a));
            }
        }
    }
    worst
}

/// Largest amplitude `a ≥ 0` such that `build(a)` passes the sampled cone
/// check, to relative precision 1e-3 (60 steps at most).
///
/// Each cone check sweeps every interpolation cell, so the search keeps the
/// number of checks small: it works on the slope model below, which is nearly
/// linear in `a`, and once the root is bracketed probes just either side of
/// the interpolated root so that one or two steps close the bracket.
fn admissible_amplitude(spec: &GraphFamilySpec, shape: &ScalarGrid, build: &dyn Fn(f64) -> Result<IntrinsicGraph>) -> Result<f64> {
    let ratio = |a: f64| -> Result<f64> {
        Ok(check_cone_condition(&build(a)?, FAMILY_CHECK_TRIALS, rng::derive_key(spec.seed, &[1]))?.worst_ratio)
    };
    // The cone ratio r of a graph with slope G is G/√(1+G²), and G scales
    // roughly linearly with the amplitude.
    let slope = |r: f64| r / (1.0 - r * r).max(1e-12).sqrt();
    let target = slope(spec.lambda);
    let (mut lo, mut lo_gap) = (0.0, -target);
    let (mut hi, mut hi_gap) = (f64::INFINITY, f64::INFINITY);
    // Which end moved last, for the Illinois down-weighting of a stale end.
    let mut last_side = 0i8;
    let mut a = match max_edge_slope(shape) {
        s if s > 0.0 => target / s,
        _ => 1.0,
    };
    for _ in 0..60 {
        let r = ratio(a)?;
        let gap = slope(r) - target;
        if r <= spec.lambda {
            (lo, lo_gap) = (a, gap);
            if last_side == -1 && hi.is_finite() {
                hi_gap *= 0.5;
            }
            last_side = -1;
        } else {
            (hi, hi_gap) = (a, gap);
            if last_side == 1 {
                lo_gap *= 0.5;
            }
            last_side = 1;
        }
        if hi.is_finite() && hi - lo <= 1e-3 * hi {
            return Ok(lo);
        }
        a = if !hi.is_finite() {
            // Always step past `lo` so that the bracket eventually closes.
            if r > 0.0 {
                (a * target / slope(r)).max(a * (1.0 + 5e-4))
            } else {
                2.0 * a
            }
        } else {
            let root = lo + (hi - lo) * (-lo_gap / (hi_gap - lo_gap)).clamp(0.0, 1.0);
            let margin = 0.02 * (hi - lo);
            if hi - lo < 0.02 * hi {
                // Straddle the estimate to close the bracket from both sides.
                let side = if last_side == -1 { 1.0 + 4e-4 } else { 1.0 - 4e-4 };
                (root * side).clamp(lo + margin, hi - margin)
            } else {
                root.clamp(lo + margin, hi - margin)
            }
        };
    }
    Err(HsError::NoConvergence("amplitude search exceeded 60 steps".into()))
}

/// Shrinks the amplitude until an independent cone check also passes.
fn finalize(spec: &GraphFamilySpec, build: &dyn Fn(f64) -> Result<IntrinsicGraph>, critical: f64) -> Result<IntrinsicGraph> {
    let mut a = spec.scale * critical;
    for _ in 0..20 {
        let g = build(a)?;
        if check_cone_condition(&g, FAMILY_CHECK_TRIALS, rng::derive_key(spec.seed, &[2]))?.passed {
            return Ok(g);
        }
        a *= 0.9;
    }
    Err(HsError::NoConvergence("could not certify the cone condition".into()))
}

/// Builds a graph of the requested family.
///
/// * vertical-plane: affine `f` whose slope vector has a random direction and
///   length `scale · λ/√(1−λ²)`, the largest slope compatible with the cone.
/// * smooth-bump: `f(v) = a·exp(−‖v‖²/σ²)` with `a` a fraction `scale` of the
///   largest amplitude passing the sampled cone check.
/// * random-lipschitz: a sum of `octaves` random grids of 4, 8, 16, … nodes per
///   axis with amplitudes halving per level, interpolated, then rescaled like
///   the bump.
pub fn make_family(spec: &GraphFamilySpec) -> Result<IntrinsicGraph> {
    spec.validate()?;
    let n = spec.n;
    let (lambda, lambda_prime) = (spec.lambda, spec.lambda_prime());
    let domain = spec.domain()?;
    let grid = DyadicGrid::new(domain.clone(), spec.resolution)?;
    let w = HorizontalDirection::y_n(n);
    match spec.family {
        Family::VerticalPlane => {
            let mut rng = rng::stream(spec.seed, &[0]);
            let dir: Vec<f64> = (0..2 * n - 1).map(|_| StandardNormal.sample(&mut rng)).collect();
            let len = spec.scale * lambda / (1.0 - lambda * lambda).sqrt();
            let dn = linalg::norm(&dir);
            let slope = linalg::scaled(len / dn, &dir);
            vertical_plane_graph(n, &slope, 0.0, domain, spec.resolution, lambda, lambda_prime)
        }
        Family::SmoothBump => {
            let sigma2 = spec.bump_width * spec.bump_width;
            let shape = ScalarGrid::from_fn(grid, |c| {
                (-HPoint::from_v0_coords(c).gauge_norm().powi(2) / sigma2).exp()
            })?;
            let build = |a: f64| IntrinsicGraph::new(w.clone(), shape.map(|v| a * v), lambda, lambda_prime);
            let critical = admissible_amplitude(spec, &shape, &build)?;
            finalize(spec, &build, critical)
        }
        Family::RandomLipschitz => {
            let mut values = vec![0.0; grid.node_count()];
            for level in 0..spec.octaves {
                let nodes = (4usize << level).min(spec.resolution);
                let coarse_grid = DyadicGrid::new(domain.clone(), nodes)?;
                let mut rng = rng::stream(spec.seed, &[1, level as u64]);
                let raw: Vec<f64> = (0..coarse_grid.node_count()).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
                let coarse = ScalarGrid::new(coarse_grid, raw)?;
                let amp = 0.5f64.powi(level as i32);
                for (i, v) in values.iter_mut().enumerate() {
                    *v += amp * coarse.eval_clamped(&grid.node(i));
                }
            }
            let shape = ScalarGrid::new(grid, values)?;
            let build = |a: f64| IntrinsicGraph::new(w.clone(), shape.map(|v| a * v), lambda, lambda_prime);
            let critical = admissible_amplitude(spec, &shape, &build)?;
            finalize(spec, &build, critical)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize) -> IntrinsicGraph {
        let d = BoxDomain::centered(&vec![2.0; 2 * n]).unwrap();
        vertical_plane_graph(n, &vec![0.0; 2 * n - 1], 0.0, d, 8, 0.3, default_lambda_prime(0.3)).unwrap()
    }

    #[test]
    fn zero_function_graph_is_identity() {
        let g = flat(2);
        let v = HPoint::new(vec![0.3, -1.0], vec![0.5, 0.0], 0.7).unwrap();
        assert_eq!(g.graph_point(&v).unwrap(), v);
        let r = check_cone_condition(&g, 500, 1).unwrap();
        assert_eq!(r.worst_ratio, 0.0);
        assert!(r.passed);
        let off = HPoint::new(vec![0.3, -1.0], vec![0.5, 0.2], 0.7).unwrap();
        assert!(g.graph_point(&off).is_err());
    }

    #[test]
    fn lambda_prime_default() {
        assert!((default_lambda_prime(0.3) - 0.72).abs() < 1e-15);
        assert!((slice_lipschitz_constant(0.3, 0.65) - 0.557142857142857).abs() < 1e-12);
    }

    #[test]
    fn constructor_validates_parameters() {
        let g = flat(1);
        let w = HorizontalDirection::y_n(1);
        assert!(IntrinsicGraph::new(w.clone(), g.f().clone(), 0.5, 0.4).is_err());
        let steep = HorizontalDirection::from_horizontal(&[2.0, 1.0]).unwrap();
        assert!(IntrinsicGraph::new(steep, g.f().clone(), 0.3, 0.72).is_err());
    }

    #[test]
    fn family_spec_validation() {
        let mut s = GraphFamilySpec::new(Family::SmoothBump, 1, 0.3, 0, 12);
        assert!(make_family(&s).is_err());
        s.resolution = 4;
        assert!(make_family(&s).is_err());
        let text = r#"{"family":"smooth-bump","n":1,"lambda":0.3,"seed":1,"resolution":8,"bogus":1}"#;
        assert!(serde_json::from_str::<GraphFamilySpec>(text).is_err());
    }
}
