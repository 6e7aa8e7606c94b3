//! Reduction of affine approximation of vertical functions on `V_0` to the
//! cube setting, through a linear change of variables on `A_0` that sends the
//! projected hyperplanes to coordinate hyperplanes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{project_affine, project_slice_affine, GridFunction};
use crate::beta::{best_affine_fit_with, best_slice_affine_fit_with, Field, QuasiBox, Quadrature};
use crate::error::{invalid, HsError, Result};
use crate::heisenberg::{a0_coords, from_a0_coords, project_along, HPoint, HorizontalDirection, VerticalSubspaceBasis};
use crate::linalg;

/// Above this condition number of the change of variables, results are
/// reported but flagged as unreliable.
pub const CONDITION_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSettings {
    /// Lattice density for the `L2` norms on quasiboxes.
    pub per_axis: usize,
    /// Haar level of the cube grid that carries the pulled-back function.
    pub level: usize,
}

impl Default for ReductionSettings {
    fn default() -> Self {
        ReductionSettings { per_axis: 10, level: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    /// `min_{g ∈ Aff} ‖f − g‖` on the box.
    pub lhs: f64,
    /// Slice-affine residual for each hyperplane on the enlarged box.
    pub per_plane: Vec<f64>,
    /// `Σ_i per_plane[i]`.
    pub rhs: f64,
    /// `lhs / rhs`, with `0/0 = 0`.
    pub ratio: f64,
    /// Condition number of the change of variables `M`.
    pub condition: f64,
    pub well_conditioned: bool,
    /// Smallest `b` with `M S_t ⊂ D_{bt}` and `D_t ⊂ M^{-1} S_{bt}`, where
    /// `S_t` is the projection of the box and `D_t = [-t, t]^{2n-1}`.
    pub shape_constant: f64,
    /// Affine residual of the pulled-back function on the cube.
    pub cube_affine: f64,
    /// Its slice-affine residuals, one per coordinate axis.
    pub cube_slices: Vec<f64>,
    /// `Σ_l cube_slices[l]² / cube_affine²`, which lies in `[d − 2, d]`.
    pub cube_ratio: f64,
}

/// The vertical hyperplane of `V_0` whose projection has unit normal
/// `normal` in `A_0` coordinates.
pub fn vertical_hyperplane(normal: &[f64]) -> Result<VerticalSubspaceBasis> {
    let d = normal.len();
    if d < 3 || d.is_multiple_of(2) {
        return invalid("normals live in A_0, of odd dimension 2n - 1 ≥ 3");
    }
    let nv = linalg::norm(normal);
    if !(nv > 0.0 && nv.is_finite()) {
        return invalid("normal must be nonzero and finite");
    }
    let unit = linalg::scaled(1.0 / nv, normal);
    let mut vectors: Vec<HPoint> = linalg::complement(&[unit], d)
        .into_iter()
        .map(|a| HPoint::from_horizontal(&from_a0_coords(&a), 0.0))
        .collect();
    let mut z = HPoint::origin(d.div_ceil(2));
    z.z = 1.0;
    vectors.push(z);
    VerticalSubspaceBasis::new(vectors)
}

/// Directions `Y_n` and `Y_n + 0.1·e` for `e` running over `X_1..X_{n−1}`
/// and `Y_1..Y_{n−1}`. Their planes `P_w` meet exactly in the center.
pub fn default_directions(n: usize) -> Result<Vec<HorizontalDirection>> {
    if n < 2 {
        return invalid("default directions need n ≥ 2");
    }
    let mut out = vec![HorizontalDirection::y_n(n)];
    for i in (0..n - 1).chain(n..2 * n - 1) {
        let mut h = vec![0.0; 2 * n];
        h[2 * n - 1] = 1.0;
        h[i] = 0.1;
        out.push(HorizontalDirection::from_horizontal(&h)?);
    }
    Ok(out)
}

fn check_vertical(f: &dyn Field, q: &QuasiBox, per_axis: usize) -> Result<()> {
    let lat = q.lattice(per_axis.min(6), None)?;
    let shift = q.radius() * q.radius();
    let step = (lat.points.len() / 64).max(1);
    for p in lat.points.iter().step_by(step) {
        let Some(a) = f.value(p) else { continue };
        let mut up = p.clone();
        *up.last_mut().expect("nonempty") += shift;
        if let Some(b) = f.value(&up) {
            if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
                return invalid("field is not constant on cosets of the center");
            }
        }
    }
    Ok(())
}

/// Compares `min_{Aff} ‖f − g‖_{L2(q)}` with `Σ_i min_{SAff_{P_i}} ‖f − g‖`
/// on `q` enlarged by `c_out`, and runs the same comparison for the
/// pulled-back function `h = f ∘ M^{-1}` on a cube around `M(S_r)`.
pub fn slicing_vertical_reduce(
    f: &dyn Field,
    planes: &[VerticalSubspaceBasis],
    q: &QuasiBox,
    c_out: f64,
    settings: &ReductionSettings,
) -> Result<ReductionReport> {
    let n = q.n();
    let d = 2 * n - 1;
    if planes.len() != d {
        return invalid(format!("need {d} hyperplanes, got {}", planes.len()));
    }
    if !(c_out >= 1.0 && c_out.is_finite()) {
        return invalid("enlargement factor must be at least 1");
    }
    if settings.level == 0 || settings.level * d > 24 {
        return invalid("cube level out of range");
    }
    let normals = planes.iter().map(VerticalSubspaceBasis::normal_in_v0).collect::<Result<Vec<_>>>()?;
    let m = DMatrix::from_fn(d, d, |i, j| normals[i][j]);
    let sv = m.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-12 * smax) {
        return Err(HsError::Dependent("hyperplanes are not in general position".into()));
    }
    let condition = smax / smin;
    let m_inv = m.clone().try_inverse().ok_or_else(|| HsError::Dependent("singular change of variables".into()))?;
    check_vertical(f, q, settings.per_axis)?;

    let quad = Quadrature::Lattice { per_axis: settings.per_axis };
    let lhs = best_affine_fit_with(f, q, quad)?.residual;
    let big = q.scaled(c_out)?;
    let per_plane = planes
        .iter()
        .map(|p| best_slice_affine_fit_with(f, &big, p, quad).map(|s| s.residual))
        .collect::<Result<Vec<_>>>()?;
    let rhs: f64 = per_plane.iter().sum();
    let ratio = if rhs > 0.0 { lhs / rhs } else if lhs <= 1e-12 { 0.0 } else { f64::INFINITY };

    // Unit shape S_1 = {sν + p : |s| ≤ 1, |p| ≤ 1} in A_0 coordinates.
    let frame = q.frame();
    let gauge_s = |a: &[f64]| {
        let s = linalg::dot(a, &frame.normal);
        let mut rest = a.to_vec();
        linalg::axpy(-s, &frame.normal, &mut rest);
        s.abs().max(linalg::norm(&rest))
    };
    let into_cube = normals
        .iter()
        .map(|nu| {
            let c = linalg::dot(nu, &frame.normal);
            c.abs() + (1.0 - c * c).max(0.0).sqrt()
        })
        .fold(0.0, f64::max);
    let mut out_of_cube: f64 = 0.0;
    for corner in 0..1usize << d {
        let u: Vec<f64> = (0..d).map(|i| if corner >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let a = &m_inv * nalgebra::DVector::from_vec(u);
        out_of_cube = out_of_cube.max(gauge_s(a.as_slice()));
    }
    let shape_constant = into_cube.max(out_of_cube);

    let base = project_along(q.w(), q.center());
    let a_c = nalgebra::DVector::from_vec(a0_coords(&base.project_pi()));
    let m_center = &m * &a_c;
    let half = into_cube * q.radius();
    let clipped = std::cell::Cell::new(0usize);
    let h = GridFunction::from_fn(d, settings.level, |u| {
        let target = &m_center + nalgebra::DVector::from_column_slice(u) * half;
        let mut v0: Vec<f64> = (&m_inv * target).iter().cloned().collect();
        v0.push(base.z);
        f.value(&v0).unwrap_or_else(|| {
            clipped.set(clipped.get() + 1);
            0.0
        })
    })?;
    if clipped.get() > 0 {
        return Err(HsError::DomainClipped { nodes: clipped.get() });
    }
    let cube_affine = h.sub(&project_affine(&h)).norm_sq().sqrt();
    let cube_slices = (0..d)
        .map(|l| project_slice_affine(&h, l).map(|p| h.sub(&p).norm_sq().sqrt()))
        .collect::<Result<Vec<_>>>()?;
    let cube_ratio = if cube_affine > 0.0 {
        cube_slices.iter().map(|s| s * s).sum::<f64>() / (cube_affine * cube_affine)
    } else {
        0.0
    };

    Ok(ReductionReport {
        lhs,
        per_plane,
        rhs,
        ratio,
        condition,
        well_conditioned: condition <= CONDITION_LIMIT,
        shape_constant,
        cube_affine,
        cube_slices,
        cube_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beta::FnField;
    use crate::heisenberg::plane_p_w;

    fn planes_of(n: usize) -> Vec<VerticalSubspaceBasis> {
        default_directions(n).unwrap().iter().map(plane_p_w).collect()
    }

    fn unit_box() -> QuasiBox {
        let x = HPoint::new(vec![0.1, -0.2], vec![0.3, 0.0], 0.1).unwrap();
        QuasiBox::new(HorizontalDirection::y_n(2), x, 0.5).unwrap()
    }

    #[test]
    fn default_planes_are_in_general_position() {
        for n in 2..=4 {
            let planes = planes_of(n);
            assert_eq!(planes.len(), 2 * n - 1);
            let f = FnField { dim: 2 * n, f: |v: &[f64]| v[0] };
            let x = HPoint::origin(n);
            let q = QuasiBox::new(HorizontalDirection::y_n(n), x, 1.0).unwrap();
            let s = ReductionSettings { per_axis: 4, level: if n == 2 { 3 } else { 2 } };
            let r = slicing_vertical_reduce(&f, &planes, &q, 2.0, &s).unwrap();
            assert!(r.well_conditioned, "{}", r.condition);
        }
    }

    #[test]
    fn affine_fields_vanish_on_both_sides() {
        let f = FnField { dim: 4, f: |v: &[f64]| 0.3 * v[0] - v[1] + 2.0 * v[2] + 5.0 };
        let r = slicing_vertical_reduce(&f, &planes_of(2), &unit_box(), 2.0, &ReductionSettings::default()).unwrap();
        assert!(r.lhs < 1e-8 && r.rhs < 1e-8, "{r:?}");
        assert!(r.cube_affine < 1e-8);
    }

    #[test]
    fn coordinate_planes_reproduce_the_cube_sandwich() {
        let planes: Vec<_> = (0..3).map(|i| vertical_hyperplane(&linalg::unit(3, i)).unwrap()).collect();
        let f = FnField { dim: 4, f: |v: &[f64]| (2.0 * v[0]).sin() * v[1] + v[2] * v[2] * v[0] };
        let r = slicing_vertical_reduce(&f, &planes, &unit_box(), 2.0, &ReductionSettings::default()).unwrap();
        assert!((r.condition - 1.0).abs() < 1e-12);
        assert!(r.cube_ratio >= 1.0 - 1e-9 && r.cube_ratio <= 3.0 + 1e-9, "{}", r.cube_ratio);
    }

    #[test]
    fn non_vertical_fields_and_dependent_planes_are_rejected() {
        let f = FnField { dim: 4, f: |v: &[f64]| v[3] };
        let s = ReductionSettings::default();
        assert!(slicing_vertical_reduce(&f, &planes_of(2), &unit_box(), 2.0, &s).is_err());
        let g = FnField { dim: 4, f: |v: &[f64]| v[0] };
        let same = vec![vertical_hyperplane(&[1.0, 0.0, 0.0]).unwrap(); 3];
        assert!(matches!(slicing_vertical_reduce(&g, &same, &unit_box(), 2.0, &s), Err(HsError::Dependent(_))));
    }
}
