//! Group law, dilations and metric gauge of the Heisenberg group `H_n`.
//!
//! Points are stored as `(x, y, z)` with `x, y ∈ R^n`. The symplectic form is
//! `Ω((x,y),(x',y')) = Σ x_i y'_i − x'_i y_i` and the product is
//! `(x+x', y+y', z+z'+Ω/2)`. Distances use the Korányi gauge
//! `((|x|²+|y|²)² + 16 z²)^{1/4}`.
//!
//! Group operations are generic over [`Scalar`] so that identities can be
//! checked over exact rationals; metric operations are `f64` only.

use std::fmt::Debug;
use std::ops::{Mul, Neg};

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, HsError, Result};
use crate::linalg;

/// Coordinate field for group arithmetic.
pub trait Scalar: Clone + PartialEq + Debug + Num + Neg<Output = Self> {
    fn half() -> Self;
    fn finite(&self) -> bool {
        true
    }
}

impl Scalar for f64 {
    fn half() -> Self {
        0.5
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl<I> Scalar for Ratio<I>
where
    I: Integer + Clone + Debug + Neg<Output = I>,
{
    fn half() -> Self {
        Ratio::new(I::one(), I::one() + I::one())
    }
}

/// Point of `H_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HPoint<T = f64> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub z: T,
}

/// Symplectic pairing of two horizontal vectors stored as `[x.., y..]`.
pub fn omega(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() / 2;
    (0..n).map(|i| u[i] * v[n + i] - v[i] * u[n + i]).sum()
}

fn omega_parts<T: Scalar>(ax: &[T], ay: &[T], bx: &[T], by: &[T]) -> T {
    let mut acc = T::zero();
    for i in 0..ax.len() {
        acc = acc + ax[i].clone() * by[i].clone() - bx[i].clone() * ay[i].clone();
    }
    acc
}

impl<T: Scalar> HPoint<T> {
    /// Builds a point, checking `n ≥ 1`, equal lengths and finiteness.
    pub fn new(x: Vec<T>, y: Vec<T>, z: T) -> Result<Self> {
        if x.is_empty() {
            return invalid("n must be at least 1");
        }
        if x.len() != y.len() {
            return Err(HsError::DimensionMismatch { expected: x.len(), found: y.len() });
        }
        if !(x.iter().all(Scalar::finite) && y.iter().all(Scalar::finite) && z.finite()) {
            return invalid("coordinates must be finite");
        }
        Ok(HPoint { x, y, z })
    }

    pub fn origin(n: usize) -> Self {
        HPoint { x: vec![T::zero(); n], y: vec![T::zero(); n], z: T::zero() }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Last horizontal `y` coordinate.
    pub fn y_n(&self) -> T {
        self.y[self.n() - 1].clone()
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n() != other.n() {
            return Err(HsError::DimensionMismatch { expected: self.n(), found: other.n() });
        }
        Ok(())
    }

    /// Symplectic pairing of the horizontal parts.
    pub fn omega_bar(&self, other: &Self) -> T {
        omega_parts(&self.x, &self.y, &other.x, &other.y)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, b: &Self) -> Self {
        let x = self.x.iter().zip(&b.x).map(|(p, q)| p.clone() + q.clone()).collect();
        let y = self.y.iter().zip(&b.y).map(|(p, q)| p.clone() + q.clone()).collect();
        let z = self.z.clone() + b.z.clone() + self.omega_bar(b) * T::half();
        HPoint { x, y, z }
    }

    pub fn inv(&self) -> Self {
        HPoint {
            x: self.x.iter().map(|v| -v.clone()).collect(),
            y: self.y.iter().map(|v| -v.clone()).collect(),
            z: -self.z.clone(),
        }
    }

    /// `a b a⁻¹ b⁻¹`, computed through the group law.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let ab = self.mul_unchecked(other);
        Ok(ab.mul_unchecked(&self.inv()).mul_unchecked(&other.inv()))
    }

    /// Horizontal projection `π`, stored as `[x.., y..]`.
    pub fn project_pi(&self) -> Vec<T> {
        self.x.iter().chain(&self.y).cloned().collect()
    }

    pub fn dilate(&self, t: T) -> Self {
        HPoint {
            x: self.x.iter().map(|v| v.clone() * t.clone()).collect(),
            y: self.y.iter().map(|v| v.clone() * t.clone()).collect(),
            z: self.z.clone() * t.clone() * t,
        }
    }
}

impl<T: Scalar> Mul for &HPoint<T> {
    type Output = HPoint<T>;

    /// Panics when the two points live in groups of different dimension;
    /// use [`HPoint::try_mul`] for a fallible product.
    fn mul(self, rhs: Self) -> HPoint<T> {
        self.try_mul(rhs).expect("group product of points with different n")
    }
}

impl HPoint<f64> {
    /// Point with horizontal part `h = [x.., y..]` and height `z`.
    pub fn from_horizontal(h: &[f64], z: f64) -> Self {
        let n = h.len() / 2;
        HPoint { x: h[..n].to_vec(), y: h[n..].to_vec(), z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite()) && self.z.is_finite()
    }

    pub fn gauge_norm(&self) -> f64 {
        let h2: f64 = self.x.iter().chain(&self.y).map(|v| v * v).sum();
        (h2 * h2 + 16.0 * self.z * self.z).sqrt().sqrt()
    }

    /// `self⁻¹ · other` without the intermediate allocation.
    pub fn left_quotient(&self, other: &Self) -> Self {
        let x: Vec<f64> = other.x.iter().zip(&self.x).map(|(b, a)| b - a).collect();
        let y: Vec<f64> = other.y.iter().zip(&self.y).map(|(b, a)| b - a).collect();
        let z = other.z - self.z - 0.5 * self.omega_bar(other);
        HPoint { x, y, z }
    }

    pub fn gauge_dist(&self, other: &Self) -> f64 {
        self.left_quotient(other).gauge_norm()
    }

    /// Coordinates on `V_0 = {y_n = 0}`: `[x_1..x_n, y_1..y_{n−1}, z]`.
    pub fn v0_coords(&self) -> Vec<f64> {
        let n = self.n();
        let mut c = Vec::with_capacity(2 * n);
        c.extend_from_slice(&self.x);
        c.extend_from_slice(&self.y[..n - 1]);
        c.push(self.z);
        c
    }

    /// Inverse of [`HPoint::v0_coords`].
    pub fn from_v0_coords(c: &[f64]) -> Self {
        let n = c.len() / 2;
        let mut y = c[n..2 * n - 1].to_vec();
        y.push(0.0);
        HPoint { x: c[..n].to_vec(), y, z: c[2 * n - 1] }
    }
}

/// `a · b`, failing on dimension mismatch.
pub fn group_mul<T: Scalar>(a: &HPoint<T>, b: &HPoint<T>) -> Result<HPoint<T>> {
    a.try_mul(b)
}

pub fn group_inv<T: Scalar>(a: &HPoint<T>) -> HPoint<T> {
    a.inv()
}

pub fn commutator<T: Scalar>(a: &HPoint<T>, b: &HPoint<T>) -> Result<HPoint<T>> {
    a.commutator(b)
}

pub fn dilate<T: Scalar>(t: T, p: &HPoint<T>) -> HPoint<T> {
    p.dilate(t)
}

pub fn gauge_norm(p: &HPoint) -> f64 {
    p.gauge_norm()
}

pub fn gauge_dist(a: &HPoint, b: &HPoint) -> f64 {
    a.gauge_dist(b)
}

pub fn project_pi<T: Scalar>(p: &HPoint<T>) -> Vec<T> {
    p.project_pi()
}

/// Whether `p` lies in the open double cone `{λ‖p‖ < |y_n(p)|}`.
pub fn cone_contains(lambda: f64, p: &HPoint) -> Result<bool> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return invalid(format!("cone parameter {lambda} outside (0,1)"));
    }
    Ok(lambda * p.gauge_norm() < p.y_n().abs())
}

/// Horizontal unit-height direction `w` with `z(w) = 0` and `y_n(w) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HPoint", into = "HPoint")]
pub struct HorizontalDirection {
    point: HPoint,
}

impl TryFrom<HPoint> for HorizontalDirection {
    type Error = HsError;
    fn try_from(p: HPoint) -> Result<Self> {
        HorizontalDirection::from_point(p)
    }
}

impl From<HorizontalDirection> for HPoint {
    fn from(w: HorizontalDirection) -> HPoint {
        w.point
    }
}

impl HorizontalDirection {
    pub fn from_point(p: HPoint) -> Result<Self> {
        let p = HPoint::new(p.x, p.y, p.z)?;
        if p.z != 0.0 {
            return invalid("direction must be horizontal (z = 0)");
        }
        if p.y_n() != 1.0 {
            return invalid("direction must have y_n = 1");
        }
        Ok(HorizontalDirection { point: p })
    }

    /// Direction with horizontal part `[x.., y..]`.
    pub fn from_horizontal(h: &[f64]) -> Result<Self> {
        if h.len() < 2 || !h.len().is_multiple_of(2) {
            return invalid("horizontal vector must have even length ≥ 2");
        }
        Self::from_point(HPoint::from_horizontal(h, 0.0))
    }

    /// The coordinate direction `Y_n`.
    pub fn y_n(n: usize) -> Self {
        let mut p = HPoint::origin(n);
        p.y[n - 1] = 1.0;
        HorizontalDirection { point: p }
    }

    pub fn n(&self) -> usize {
        self.point.n()
    }

    pub fn point(&self) -> &HPoint {
        &self.point
    }

    pub fn horizontal(&self) -> Vec<f64> {
        self.point.project_pi()
    }

    /// The one-parameter subgroup element `δ_t(w)`.
    pub fn power(&self, t: f64) -> HPoint {
        self.point.dilate(t)
    }

    /// Whether `w` and `other` commute, i.e. `|Ω(w, w')| ≤ tol`.
    pub fn commutes_with(&self, other: &Self, tol: f64) -> bool {
        self.n() == other.n() && self.point.omega_bar(&other.point).abs() <= tol
    }

    /// Unit normal of `π(P_w)` inside `A_0 = {z = 0, y_n = 0}`, oriented so
    /// that its `x_n` component is positive.
    pub fn transverse_normal(&self) -> Vec<f64> {
        let n = self.n();
        let h = self.horizontal();
        // J w pairs with u through Ω(u, w) = ⟨u, J w⟩.
        let mut jw: Vec<f64> = h[n..].iter().cloned().chain(h[..n].iter().map(|v| -v)).collect();
        jw[2 * n - 1] = 0.0;
        let nn = linalg::norm(&jw);
        linalg::scaled(1.0 / nn, &jw)
    }
}

/// `Π_w(h) = h · δ_{−y_n(h)}(w)`, the projection to `V_0` along `w`-cosets.
pub fn project_along(w: &HorizontalDirection, h: &HPoint) -> HPoint {
    let t = -h.y_n();
    let wp = w.point();
    let mut out = h.clone();
    for i in 0..h.n() {
        out.x[i] += t * wp.x[i];
        out.y[i] += t * wp.y[i];
    }
    let n = h.n();
    out.y[n - 1] = 0.0;
    out.z += 0.5 * t * h.omega_bar(wp);
    out
}

/// Basis of a vertical subgroup: horizontal vectors followed by `Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerticalSubspaceBasis {
    pub vectors: Vec<HPoint>,
}

impl VerticalSubspaceBasis {
    /// Validates that exactly one vector is a nonzero multiple of `Z`, the
    /// others are horizontal, and their projections are independent.
    pub fn new(vectors: Vec<HPoint>) -> Result<Self> {
        let n = vectors.first().map(HPoint::n).ok_or_else(|| {
            HsError::InvalidArgument("empty basis".into())
        })?;
        let mut horizontal = Vec::new();
        let mut centers = 0;
        for v in &vectors {
            if v.n() != n {
                return Err(HsError::DimensionMismatch { expected: n, found: v.n() });
            }
            let h = v.project_pi();
            if h.iter().all(|c| *c == 0.0) {
                if v.z == 0.0 {
                    return Err(HsError::Dependent("zero vector in basis".into()));
                }
                centers += 1;
            } else if v.z != 0.0 {
                return invalid("non-central basis vectors must be horizontal");
            } else {
                horizontal.push(h);
            }
        }
        if centers != 1 {
            return invalid("basis must contain the center direction exactly once");
        }
        linalg::orthonormalize(&horizontal)
            .map_err(|i| HsError::Dependent(format!("horizontal vector {i} is dependent")))?;
        Ok(VerticalSubspaceBasis { vectors })
    }

    pub fn n(&self) -> usize {
        self.vectors[0].n()
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Orthonormalized horizontal parts.
    pub fn horizontal_basis(&self) -> Vec<Vec<f64>> {
        let h: Vec<Vec<f64>> = self
            .vectors
            .iter()
            .filter(|v| v.z == 0.0)
            .map(HPoint::project_pi)
            .collect();
        linalg::orthonormalize(&h).expect("validated on construction")
    }

    /// For a `(2n−1)`-dimensional subgroup of `V_0`, the unit normal of its
    /// horizontal part inside `A_0`, written in `V_0` coordinates without the
    /// `z` slot (length `2n−1`).
    pub fn normal_in_v0(&self) -> Result<Vec<f64>> {
        let n = self.n();
        if self.dim() != 2 * n - 1 {
            return invalid("normal defined only for (2n-1)-dimensional subgroups");
        }
        let mut spanning: Vec<Vec<f64>> = Vec::new();
        for h in self.horizontal_basis() {
            if h[2 * n - 1].abs() > 1e-12 {
                return invalid("subgroup is not contained in V_0");
            }
            spanning.push(a0_coords(&h));
        }
        let ortho = linalg::orthonormalize(&spanning)
            .map_err(|_| HsError::Dependent("degenerate subgroup".into()))?;
        let c = linalg::complement(&ortho, 2 * n - 1);
        Ok(c.into_iter().next().expect("codimension one"))
    }
}

/// Drops the `y_n` slot of a horizontal vector `[x.., y..]`.
pub fn a0_coords(h: &[f64]) -> Vec<f64> {
    let n = h.len() / 2;
    h[..2 * n - 1].to_vec()
}

/// Inverse of [`a0_coords`], inserting `y_n = 0`.
pub fn from_a0_coords(a: &[f64]) -> Vec<f64> {
    let mut h = a.to_vec();
    h.push(0.0);
    h
}

/// Basis of `S^Ω = {v : Ω(v, s) = 0 for all s ∈ S}`.
pub fn symplectic_complement(s: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let dim = match s.first() {
        Some(v) => v.len(),
        None => return invalid("empty input; the complement of {0} is everything"),
    };
    if dim == 0 || dim % 2 != 0 {
        return invalid("vectors must have even length");
    }
    if let Some(v) = s.iter().find(|v| v.len() != dim) {
        return Err(HsError::DimensionMismatch { expected: dim, found: v.len() });
    }
    linalg::orthonormalize(s).map_err(|i| HsError::Dependent(format!("vector {i} is dependent")))?;
    let n = dim / 2;
    let js: Vec<Vec<f64>> = s
        .iter()
        .map(|v| v[n..].iter().cloned().chain(v[..n].iter().map(|c| -c)).collect())
        .collect();
    let ortho = linalg::orthonormalize(&js).expect("J is invertible");
    Ok(linalg::complement(&ortho, dim))
}

/// Basis of `P_w = V_0 ∩ w^Ω̄ = C_w + ⟨Z⟩`, horizontal vectors first.
pub fn plane_p_w(w: &HorizontalDirection) -> VerticalSubspaceBasis {
    let n = w.n();
    let dim = 2 * n;
    let h = w.horizontal();
    let jw: Vec<f64> = h[n..].iter().cloned().chain(h[..n].iter().map(|c| -c)).collect();
    let constraints = linalg::orthonormalize(&[linalg::unit(dim, dim - 1), jw])
        .expect("J w always has x_n component 1");
    let mut vectors: Vec<HPoint> = linalg::complement(&constraints, dim)
        .into_iter()
        .map(|c| HPoint::from_horizontal(&c, 0.0))
        .collect();
    let mut z = HPoint::origin(n);
    z.z = 1.0;
    vectors.push(z);
    VerticalSubspaceBasis { vectors }
}
