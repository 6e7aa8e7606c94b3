//! Comparisons between non-parametric beta numbers and parametric fits, and
//! the switch between parametrizations of affine slices.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fit::{best_affine_fit_with, best_slice_affine_fit_with, Quadrature};
use super::quasibox::QuasiBox;
use super::{beta_number, BetaEstimate};
use crate::error::{invalid, HsError, Result};
use crate::graphs::{reparametrize, IntrinsicGraph};
use crate::heisenberg::{omega, plane_p_w, project_along, HPoint, HorizontalDirection};
use crate::linalg;
use crate::rng;

/// Parameters shared by the comparison sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSettings {
    /// Quasibox enlargement constant.
    pub c: f64,
    /// Proposals per beta estimate.
    pub samples: usize,
    pub seed: u64,
    /// Lattice cells per unit length for the L2 norms.
    pub per_axis: usize,
}

impl Default for ComparisonSettings {
    fn default() -> Self {
        ComparisonSettings { c: 2.5, samples: 4000, seed: 0, per_axis: 12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametricComparison {
    pub beta: BetaEstimate,
    /// `inf_{h ∈ Aff} ‖f − h‖_{L2(Q_w(x, c r))}`.
    pub residual: f64,
    /// `r^{−(2n+3)/2} · residual`.
    pub normalized_residual: f64,
    /// `β / normalized_residual`, with `0/0 = 0`.
    pub ratio: f64,
}

/// Ratio of `β_Γ(x, r)` to the normalized affine residual of the
/// parametrization on the enlarged quasibox.
pub fn beta_vs_parametric(g: &IntrinsicGraph, x: &HPoint, r: f64, s: &ComparisonSettings) -> Result<ParametricComparison> {
    let beta = beta_number(g, x, r, s.samples, s.seed)?;
    let q = QuasiBox::new(g.w().clone(), x.clone(), s.c * r)?;
    let fit = best_affine_fit_with(g.f(), &q, Quadrature::Lattice { per_axis: s.per_axis })?;
    let normalized = r.powf(-(2.0 * g.n() as f64 + 3.0) / 2.0) * fit.residual;
    // Relative size at which the residual counts as zero.
    let floor = 1e-10 * (1.0 + g.f().max().abs().max(g.f().min().abs())) * q.volume().sqrt();
    let ratio = if fit.residual <= floor {
        if beta.value > 3.0 * beta.stderr + 1e-12 {
            return Err(HsError::Violation(format!(
                "beta {} is nonzero while the affine residual vanishes",
                beta.value
            )));
        }
        0.0
    } else {
        beta.value / normalized
    };
    Ok(ParametricComparison { beta, residual: fit.residual, normalized_residual: normalized, ratio })
}

/// An affine function `T(p) = ⟨a, π(p)⟩ + b` on the vertical subgroup `P_w`,
/// with gradient `a ∈ C_w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneAffine {
    pub domain: HorizontalDirection,
    /// Horizontal gradient `[x.., y..]`, orthogonal to `J w` and to `Y_n`.
    pub gradient: Vec<f64>,
    pub constant: f64,
}

impl PlaneAffine {
    pub fn new(domain: HorizontalDirection, gradient: Vec<f64>, constant: f64) -> Result<Self> {
        let n = domain.n();
        if gradient.len() != 2 * n {
            return Err(HsError::DimensionMismatch { expected: 2 * n, found: gradient.len() });
        }
        let scale = 1.0 + linalg::norm(&gradient);
        let w = domain.horizontal();
        if gradient[2 * n - 1].abs() > 1e-12 * scale || omega(&gradient, &w).abs() > 1e-12 * scale {
            return invalid("gradient must lie in C_w");
        }
        Ok(PlaneAffine { domain, gradient, constant })
    }

    pub fn eval(&self, p: &HPoint) -> f64 {
        linalg::dot(&self.gradient, &p.project_pi()) + self.constant
    }

    pub fn lipschitz(&self) -> f64 {
        linalg::norm(&self.gradient)
    }

    /// The graph point `p · δ_{T(p)}(v)` over `p ∈ P_w` along direction `v`.
    pub fn graph_point(&self, p: &HPoint, along: &HorizontalDirection) -> HPoint {
        p * &along.power(self.eval(p))
    }
}

/// Tolerance for `[w, w′] = 0`.
const COMMUTE_TOL: f64 = 1e-12;

/// Rewrites the plane `Γ_{T,w}` as `Γ_{T′,w′}` with `T′` affine on `P_w`.
///
/// With `s = w − w′`, the map `p ↦ p · δ_{T(p)}(s)` acts on `C_w` as
/// `m(q) = (I + s aᵀ) q + b s`; inverting it gives
/// `T′(q) = (⟨a, q⟩ + b) / (1 + ⟨a, s⟩)`.
pub fn switch_affine(t: &PlaneAffine, w: &HorizontalDirection, w_prime: &HorizontalDirection) -> Result<PlaneAffine> {
    if t.domain != *w {
        return invalid("T must be defined on P_w");
    }
    if w.n() != w_prime.n() {
        return Err(HsError::DimensionMismatch { expected: w.n(), found: w_prime.n() });
    }
    let commutator = w.point().omega_bar(w_prime.point());
    if commutator.abs() >= COMMUTE_TOL {
        return invalid(format!("w and w' do not commute (Ω = {commutator:e})"));
    }
    let s: Vec<f64> = w.horizontal().iter().zip(w_prime.horizontal()).map(|(a, b)| a - b).collect();
    if linalg::norm(&s) * t.lipschitz() >= 0.5 {
        return invalid("need ‖w − w'‖ · Lip(T) < 1/2");
    }
    let k = 1.0 + linalg::dot(&t.gradient, &s);
    if k.abs() < 1e-12 {
        return Err(HsError::Numerical("the induced map on C_w is not invertible".into()));
    }
    Ok(PlaneAffine {
        domain: w.clone(),
        gradient: linalg::scaled(1.0 / k, &t.gradient),
        constant: t.constant / k,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchCheck {
    /// Largest coordinate-wise difference between `p·δ_{T(p)}(w)` and the
    /// point of `Γ_{T′,w′}` on the same `w′`-coset.
    pub max_gap: f64,
    /// The same comparison in the gauge distance. The square root on the
    /// vertical part turns `z` rounding of order `1e-16` into gaps near `1e-8`.
    pub max_gauge_gap: f64,
    pub lip_ratio: f64,
    pub points: usize,
}

/// Checks `Γ_{T,w} = Γ_{T′,w′}` on `points` random nodes of `P_w` with
/// horizontal coordinates in `[−extent, extent]`.
pub fn verify_switch(
    t: &PlaneAffine,
    t_prime: &PlaneAffine,
    w_prime: &HorizontalDirection,
    points: usize,
    extent: f64,
    seed: u64,
) -> Result<SwitchCheck> {
    let w = &t.domain;
    let basis = plane_p_w(w).horizontal_basis();
    let mut rng = rng::stream(seed, &[0x5717C4]);
    let mut max_gap: f64 = 0.0;
    let mut max_gauge_gap: f64 = 0.0;
    for _ in 0..points {
        let mut h = vec![0.0; 2 * w.n()];
        for b in &basis {
            linalg::axpy(rng.random_range(-extent..=extent), b, &mut h);
        }
        let p = HPoint::from_horizontal(&h, rng.random_range(-extent..=extent) * extent);
        let on_first = t.graph_point(&p, w);
        let q = project_along(w_prime, &on_first);
        let on_second = t_prime.graph_point(&q, w_prime);
        let (a, b) = (on_first.project_pi(), on_second.project_pi());
        for (u, v) in a.iter().zip(&b) {
            max_gap = max_gap.max((u - v).abs());
        }
        max_gap = max_gap.max((on_first.z - on_second.z).abs());
        max_gauge_gap = max_gauge_gap.max(on_first.gauge_dist(&on_second));
    }
    let lip_ratio = if t.lipschitz() > 0.0 { t_prime.lipschitz() / t.lipschitz() } else { 0.0 };
    Ok(SwitchCheck { max_gap, max_gauge_gap, lip_ratio, points })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaffComparison {
    /// `min_σ ‖f′ − σ‖_{L2(Q_{w′}(x, r))}` over `P_w`-slice-affine `σ`.
    pub left: f64,
    /// `min_σ ‖f − σ‖_{L2(Q_w(x, c r))}`.
    pub right: f64,
    /// `left / right`, with `0/0 = 0`.
    pub ratio: f64,
    pub flagged_slices: usize,
}

/// Slice-affine residuals of the `w′`- and `w`-parametrizations of the same
/// graph, both sliced along `P_w`.
pub fn saff_compare(
    g: &IntrinsicGraph,
    w: &HorizontalDirection,
    w_prime: &HorizontalDirection,
    x: &HPoint,
    r: f64,
    s: &ComparisonSettings,
) -> Result<SaffComparison> {
    if !w.commutes_with(w_prime, COMMUTE_TOL) {
        return invalid("w and w' must commute");
    }
    let f = if g.w() == w { g.clone() } else { reparametrize(g, w)? };
    let f_prime = reparametrize(g, w_prime)?;
    let plane = plane_p_w(w);
    let quad = Quadrature::Lattice { per_axis: s.per_axis };
    let left = best_slice_affine_fit_with(f_prime.f(), &QuasiBox::new(w_prime.clone(), x.clone(), r)?, &plane, quad)?;
    let right = best_slice_affine_fit_with(f.f(), &QuasiBox::new(w.clone(), x.clone(), s.c * r)?, &plane, quad)?;
    let ratio = match (left.residual, right.residual) {
        (_, b) if b > 0.0 => left.residual / b,
        (a, _) if a <= 1e-12 => 0.0,
        _ => f64::INFINITY,
    };
    Ok(SaffComparison {
        left: left.residual,
        right: right.residual,
        ratio,
        flagged_slices: left.flagged + right.flagged,
    })
}

/// `c · {p : |π(p)| ≤ r, |z(p)| ≤ b r²}` with `b = √(μ⁴ − 1)/4`, which sits
/// between `B(c, r)` and `B(c, μ r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quasiball {
    pub center: HPoint,
    /// Inner radius `r`: `B(center, r)` is contained in the set.
    pub radius: f64,
    /// Outer ratio `μ`: the set is contained in `B(center, μ r)`.
    pub mu: f64,
}

impl Quasiball {
    pub fn new(center: HPoint, radius: f64, mu: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid("quasiball radius must be positive");
        }
        if !(mu >= 2f64.powf(0.25) && mu.is_finite()) {
            return invalid("cylinder quasiballs need μ ≥ 2^{1/4}");
        }
        Ok(Quasiball { center, radius, mu })
    }

    fn height(&self) -> f64 {
        (self.mu.powi(4) - 1.0).sqrt() / 4.0 * self.radius * self.radius
    }

    pub fn contains(&self, p: &HPoint) -> bool {
        let u = self.center.left_quotient(p);
        linalg::norm(&u.project_pi()) <= self.radius && u.z.abs() <= self.height()
    }

    /// Midpoint lattice with `per_axis` cells across each horizontal diameter
    /// and along the height; returns the nodes and the common cell volume.
    pub fn lattice(&self, per_axis: usize) -> (Vec<HPoint>, f64) {
        let d = 2 * self.center.n();
        let h = 2.0 * self.radius / per_axis as f64;
        let hz = 2.0 * self.height() / per_axis as f64;
        let total = per_axis.pow(d as u32 + 1);
        let mut out = Vec::new();
        for flat in 0..total {
            let mut rest = flat;
            let mut c = vec![0.0; d + 1];
            for (a, ca) in c.iter_mut().enumerate().rev() {
                let i = rest % per_axis;
                rest /= per_axis;
                *ca = if a == d { -self.height() + (i as f64 + 0.5) * hz } else { -self.radius + (i as f64 + 0.5) * h };
            }
            if linalg::norm(&c[..d]) <= self.radius {
                out.push(&self.center * &HPoint::from_horizontal(&c[..d], c[d]));
            }
        }
        (out, h.powi(d as i32) * hz)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> HPoint {
        let d = 2 * self.center.n();
        loop {
            let c: Vec<f64> = (0..d).map(|_| rng.random_range(-self.radius..=self.radius)).collect();
            if linalg::norm(&c) <= self.radius {
                let z = rng.random_range(-self.height()..=self.height());
                return &self.center * &HPoint::from_horizontal(&c, z);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipFitReport {
    /// `Lip(F) / Lip(f)`, zero for constant `f`.
    pub ratio: f64,
    pub fit_lipschitz: f64,
    pub sampled_lipschitz: f64,
}

/// Lipschitz constant of the best affine `L2(U)` approximation of `f`
/// relative to the sampled Lipschitz constant of `f` on `U`.
///
/// The sampled constant uses `pairs` random pairs plus short horizontal steps
/// along the coordinate axes and along the fitted gradient, so it is exact
/// for affine `f`.
pub fn lip_of_best_fit(
    f: &(dyn Fn(&HPoint) -> f64 + Sync),
    u: &Quasiball,
    per_axis: usize,
    pairs: usize,
    seed: u64,
) -> Result<LipFitReport> {
    let d = 2 * u.center.n();
    let (nodes, _) = u.lattice(per_axis);
    if nodes.len() < d + 2 {
        return Err(HsError::TooFewSamples { got: nodes.len(), needed: d + 2 });
    }
    let rows: Vec<Vec<f64>> = nodes.iter().map(HPoint::project_pi).collect();
    let values: Vec<f64> = nodes.iter().map(f).collect();
    let (coeffs, _, _) = super::fit::fit_columns(&rows, &values);
    let grad = coeffs[..d].to_vec();
    let fit_lip = linalg::norm(&grad);

    let mut rng = rng::stream(seed, &[0x11F]);
    let mut worst: f64 = 0.0;
    let mut directions: Vec<Vec<f64>> = (0..d).map(|i| linalg::unit(d, i)).collect();
    if fit_lip > 0.0 {
        directions.push(linalg::scaled(1.0 / fit_lip, &grad));
    }
    let step = 1e-3 * u.radius;
    for _ in 0..pairs {
        let p = u.sample(&mut rng);
        let q = u.sample(&mut rng);
        let dpq = p.gauge_dist(&q);
        if dpq > 0.0 {
            worst = worst.max((f(&p) - f(&q)).abs() / dpq);
        }
        for e in &directions {
            let q = &p * &HPoint::from_horizontal(&linalg::scaled(step, e), 0.0);
            worst = worst.max((f(&p) - f(&q)).abs() / step);
        }
    }
    let ratio = if worst > 0.0 { fit_lip / worst } else { 0.0 };
    Ok(LipFitReport { ratio, fit_lipschitz: fit_lip, sampled_lipschitz: worst })
}
