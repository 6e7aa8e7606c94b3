//! Quasiboxes `Q_w(g, r) = Π_w(g · δ_r(R_w))` and quadrature lattices on them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, HsError, Result};
use crate::heisenberg::{a0_coords, project_along, HPoint, HorizontalDirection};
use crate::linalg;

/// Coordinates `(s, p, t)` of a point `sν + p + tZ` of `V_0`, with `p`
/// expressed in an orthonormal basis of `C_w`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxCoords {
    pub s: f64,
    pub p: Vec<f64>,
    pub t: f64,
}

impl BoxCoords {
    /// Smallest `ρ ≥ 0` with `δ_{1/ρ}` of the point inside the unit box.
    pub fn gauge(&self) -> f64 {
        self.s.abs().max(linalg::norm(&self.p)).max(self.t.abs().sqrt())
    }

    pub fn in_unit_box(&self) -> bool {
        self.s.abs() <= 1.0 && linalg::dot(&self.p, &self.p) <= 1.0 && self.t.abs() <= 1.0
    }
}

/// The transverse normal `ν` of `C_w` inside `A_0` and an orthonormal basis of
/// `C_w`, both in `A_0` coordinates.
#[derive(Clone, Debug)]
pub struct BoxFrame {
    pub normal: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl BoxFrame {
    pub fn of(w: &HorizontalDirection) -> Self {
        let normal = a0_coords(&w.transverse_normal());
        let basis = linalg::complement(std::slice::from_ref(&normal), normal.len());
        BoxFrame { normal, basis }
    }

    /// Splits a point of `V_0` (given in `V_0` coordinates) into `(s, p, t)`.
    pub fn split(&self, v0: &[f64]) -> BoxCoords {
        let d = v0.len();
        let a = &v0[..d - 1];
        BoxCoords {
            s: linalg::dot(a, &self.normal),
            p: self.basis.iter().map(|b| linalg::dot(a, b)).collect(),
            t: v0[d - 1],
        }
    }

    /// Inverse of [`BoxFrame::split`].
    pub fn join(&self, c: &BoxCoords) -> Vec<f64> {
        let mut out = linalg::scaled(c.s, &self.normal);
        for (b, pi) in self.basis.iter().zip(&c.p) {
            linalg::axpy(*pi, b, &mut out);
        }
        out.push(c.t);
        out
    }
}

/// `Q_w(g, r)`: the image of the unit box `R_w = {sν + p + tZ : |s| ≤ 1,
/// |p| ≤ 1, |t| ≤ 1}` under `u ↦ Π_w(g · δ_r(u))`. The map preserves
/// Lebesgue measure on `V_0`, so lattices and uniform samples of `R_w` push
/// forward to quadratures of `Q_w(g, r)` with the same weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiBox {
    w: HorizontalDirection,
    center: HPoint,
    radius: f64,
}

/// Quadrature nodes in `V_0` coordinates with a common weight. Nodes that
/// share a slice id lie on one coset of the slicing subgroup.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub points: Vec<Vec<f64>>,
    pub weight: f64,
    pub slices: Vec<usize>,
}

impl QuasiBox {
    pub fn new(w: HorizontalDirection, center: HPoint, radius: f64) -> Result<Self> {
        if w.n() != center.n() {
            return Err(HsError::DimensionMismatch { expected: w.n(), found: center.n() });
        }
        if w.n() < 2 {
            return invalid("quasiboxes need n ≥ 2");
        }
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return invalid("quasibox radius must be positive and the center finite");
        }
        Ok(QuasiBox { w, center, radius })
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn w(&self) -> &HorizontalDirection {
        &self.w
    }

    pub fn center(&self) -> &HPoint {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// The same box with radius scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.w.clone(), self.center.clone(), self.radius * factor)
    }

    pub fn frame(&self) -> BoxFrame {
        BoxFrame::of(&self.w)
    }

    /// Coordinates of `δ_{1/r}(Π_w(g⁻¹ q))`, the preimage of `q` in `R_w`.
    pub fn pullback(&self, q: &[f64]) -> BoxCoords {
        self.pullback_with(&self.frame(), q)
    }

    fn pullback_with(&self, frame: &BoxFrame, q: &[f64]) -> BoxCoords {
        let x = project_along(&self.w, &self.center.left_quotient(&HPoint::from_v0_coords(q)));
        let r = self.radius;
        let mut c = frame.split(&x.v0_coords());
        c.s /= r;
        c.p.iter_mut().for_each(|v| *v /= r);
        c.t /= r * r;
        c
    }

    /// The point `Π_w(g · δ_r(u))` of `V_0` for `u` with coordinates `c`.
    pub fn push(&self, c: &BoxCoords) -> Vec<f64> {
        self.push_with(&self.frame(), c)
    }

    fn push_with(&self, frame: &BoxFrame, c: &BoxCoords) -> Vec<f64> {
        let u = HPoint::from_v0_coords(&frame.join(c)).dilate(self.radius);
        project_along(&self.w, &(&self.center * &u)).v0_coords()
    }

    /// Exact membership test for a point of `V_0` in coordinates.
    pub fn contains(&self, q: &[f64]) -> bool {
        self.pullback(q).in_unit_box()
    }

    /// Smallest radius `ρ` with `q ∈ Q_w(g, ρ)`.
    pub fn quasi_radius(&self, q: &[f64]) -> f64 {
        self.pullback(q).gauge() * self.radius
    }

    /// Coordinate bounding box `(lo, hi)` in `V_0` coordinates. The box is
    /// an affine image of `R_w`, so the bounds are exact.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let frame = self.frame();
        let k = frame.basis.len();
        let origin = self.push_with(&frame, &BoxCoords { s: 0.0, p: vec![0.0; k], t: 0.0 });
        let column = |c: BoxCoords| -> Vec<f64> {
            self.push_with(&frame, &c).iter().zip(&origin).map(|(a, b)| a - b).collect()
        };
        let ls = column(BoxCoords { s: 1.0, p: vec![0.0; k], t: 0.0 });
        let lt = column(BoxCoords { s: 0.0, p: vec![0.0; k], t: 1.0 });
        let lp: Vec<Vec<f64>> = (0..k).map(|i| column(BoxCoords { s: 0.0, p: linalg::unit(k, i), t: 0.0 })).collect();
        let half: Vec<f64> = (0..origin.len())
            .map(|j| ls[j].abs() + lt[j].abs() + lp.iter().map(|c| c[j] * c[j]).sum::<f64>().sqrt())
            .collect();
        let lo = origin.iter().zip(&half).map(|(o, h)| o - h).collect();
        let hi = origin.iter().zip(&half).map(|(o, h)| o + h).collect();
        (lo, hi)
    }

    /// Lebesgue measure `4 · ω_{2n−2} · r^{2n+1}`, with `ω_k` the volume of
    /// the unit ball of `R^k`.
    pub fn volume(&self) -> f64 {
        let n = self.n();
        let m = (n - 1) as i32;
        let ball = std::f64::consts::PI.powi(m) / (1..=m).map(f64::from).product::<f64>();
        4.0 * ball * self.radius.powi(2 * n as i32 + 1)
    }

    /// A uniform sample of `Q_w(g, r)` in `V_0` coordinates.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let frame = self.frame();
        let k = frame.basis.len();
        let p = loop {
            let p: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
            if linalg::dot(&p, &p) <= 1.0 {
                break p;
            }
        };
        let c = BoxCoords { s: rng.random_range(-1.0..=1.0), p, t: rng.random_range(-1.0..=1.0) };
        self.push_with(&frame, &c)
    }

    /// Midpoint lattice of spacing `2/per_axis` in `R_w`, pushed into the box.
    ///
    /// The lattice axes are `slicing` (a unit normal in `A_0` coordinates,
    /// `ν` by default), an orthonormal complement of it in `A_0`, and `Z`.
    /// Lattice rows along the first axis map onto single cosets of the
    /// subgroup with that normal, which is what the slice ids record. Cells
    /// whose midpoint leaves `R_w` are dropped.
    pub fn lattice(&self, per_axis: usize, slicing: Option<&[f64]>) -> Result<Lattice> {
        if per_axis < 2 {
            return invalid("lattices need at least 2 cells per axis");
        }
        let frame = self.frame();
        let dim_a = 2 * self.n() - 1;
        let lead = match slicing {
            Some(v) if v.len() == dim_a => {
                let nv = linalg::norm(v);
                if !(nv > 0.0) {
                    return invalid("slicing normal must be nonzero");
                }
                linalg::scaled(1.0 / nv, v)
            }
            Some(v) => return Err(HsError::DimensionMismatch { expected: dim_a, found: v.len() }),
            None => frame.normal.clone(),
        };
        let mut axes = vec![lead.clone()];
        axes.extend(linalg::complement(&[lead], dim_a));
        let h = 2.0 / per_axis as f64;
        // Half-extent of R_w along a unit vector e of A_0.
        let extent = |e: &[f64]| {
            let c = linalg::dot(e, &frame.normal);
            c.abs() + (1.0 - c * c).max(0.0).sqrt()
        };
        let counts: Vec<usize> = axes
            .iter()
            .map(|e| (extent(e) / h - 1e-9).ceil().max(1.0) as usize)
            .chain(std::iter::once(per_axis.div_ceil(2)))
            .collect();
        let total: usize = counts.iter().map(|k| 2 * k).product();
        if total > 50_000_000 {
            return invalid("lattice too fine");
        }
        let mut points = Vec::new();
        let mut slices = Vec::new();
        let mut a = vec![0.0; dim_a];
        for flat in 0..total {
            let mut rest = flat;
            let mut idx = vec![0usize; counts.len()];
            for (i, k) in counts.iter().enumerate().rev() {
                idx[i] = rest % (2 * k);
                rest /= 2 * k;
            }
            let coord = |i: usize| (idx[i] as f64 - counts[i] as f64 + 0.5) * h;
            a.iter_mut().for_each(|v| *v = 0.0);
            for (i, e) in axes.iter().enumerate() {
                linalg::axpy(coord(i), e, &mut a);
            }
            let mut v0 = a.clone();
            v0.push(coord(counts.len() - 1));
            let c = frame.split(&v0);
            if c.in_unit_box() {
                points.push(self.push_with(&frame, &c));
                slices.push(idx[0]);
            }
        }
        let weight = h.powi(2 * self.n() as i32) * self.radius.powi(2 * self.n() as i32 + 1);
        Ok(Lattice { points, weight, slices })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn sample_box() -> QuasiBox {
        let w = HorizontalDirection::from_horizontal(&[0.1, -0.2, 0.05, 1.0]).unwrap();
        let g = HPoint::new(vec![0.3, -0.4], vec![0.2, 0.7], 0.25).unwrap();
        QuasiBox::new(w, g, 0.8).unwrap()
    }

    #[test]
    fn push_and_pullback_are_inverse() {
        let q = sample_box();
        let c = BoxCoords { s: 0.3, p: vec![-0.2, 0.5], t: -0.7 };
        let back = q.pullback(&q.push(&c));
        assert!((back.s - c.s).abs() < 1e-12);
        assert!((back.t - c.t).abs() < 1e-12);
        for (a, b) in back.p.iter().zip(&c.p) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn samples_are_members_and_lattice_volume_converges() {
        let q = sample_box();
        let mut rng = rng::stream(3, &[]);
        for _ in 0..200 {
            let v = q.sample(&mut rng);
            assert!(q.pullback(&v).gauge() <= 1.0 + 1e-12);
        }
        let lat = q.lattice(24, None).unwrap();
        let approx = lat.points.len() as f64 * lat.weight;
        assert!((approx / q.volume() - 1.0).abs() < 0.05, "{approx} vs {}", q.volume());
    }

    #[test]
    fn bounding_box_contains_samples_and_is_nearly_attained() {
        let q = sample_box();
        let (lo, hi) = q.bounding_box();
        let mut rng = rng::stream(5, &[]);
        let mut seen_lo = hi.clone();
        let mut seen_hi = lo.clone();
        for _ in 0..4000 {
            let v = q.sample(&mut rng);
            for j in 0..v.len() {
                assert!(v[j] >= lo[j] - 1e-12 && v[j] <= hi[j] + 1e-12);
                seen_lo[j] = seen_lo[j].min(v[j]);
                seen_hi[j] = seen_hi[j].max(v[j]);
            }
        }
        for j in 0..lo.len() {
            let width = hi[j] - lo[j];
            assert!(seen_lo[j] - lo[j] < 0.15 * width && hi[j] - seen_hi[j] < 0.15 * width);
        }
    }

    #[test]
    fn lattice_rows_lie_on_single_cosets() {
        let q = sample_box();
        let normal = [0.6, 0.0, 0.8];
        let lat = q.lattice(8, Some(&normal)).unwrap();
        let mut levels = std::collections::BTreeMap::new();
        for (p, s) in lat.points.iter().zip(&lat.slices) {
            let level = linalg::dot(&p[..3], &normal);
            let e = levels.entry(*s).or_insert(level);
            assert!((*e - level).abs() < 1e-12);
        }
        assert!(levels.len() > 1);
    }
}
