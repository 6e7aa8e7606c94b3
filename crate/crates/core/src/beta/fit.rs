//! Least-squares affine and slice-affine fits of scalar fields on quasiboxes.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::quasibox::QuasiBox;
use crate::error::{HsError, Result};
use crate::grid::{DyadicGrid, ScalarGrid};
use crate::heisenberg::VerticalSubspaceBasis;
use crate::linalg;

/// A real function on `V_0`, addressed in `V_0` coordinates
/// `[x_1..x_n, y_1..y_{n−1}, z]`.
pub trait Field: Sync {
    /// Length of the coordinate vector, `2n`.
    fn dim(&self) -> usize;
    /// `None` outside the field's domain.
    fn value(&self, v: &[f64]) -> Option<f64>;
    /// The sampling grid, if the field is grid-backed.
    fn grid(&self) -> Option<&DyadicGrid> {
        None
    }
}

impl Field for ScalarGrid {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn value(&self, v: &[f64]) -> Option<f64> {
        self.eval(v)
    }

    fn grid(&self) -> Option<&DyadicGrid> {
        Some(&self.grid)
    }
}

/// Wraps a closure defined on all of `V_0`.
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Field for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, v: &[f64]) -> Option<f64> {
        Some((self.f)(v))
    }
}

/// Where the L2 norm over a quasibox is sampled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Quadrature {
    /// The field's own grid nodes inside the box, weighted by cell volume.
    GridNodes,
    /// A midpoint lattice of the box's unit cell with `per_axis` cells per
    /// unit length; exact slice alignment and exact translation covariance.
    Lattice { per_axis: usize },
}

/// `h(v) = Σ α_i x_i + Σ β_i y_i + γ`, coefficients in `V_0` coordinate order
/// with `γ` last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineFunction {
    pub coefficients: Vec<f64>,
}

impl AffineFunction {
    pub fn eval(&self, v: &[f64]) -> f64 {
        let k = self.coefficients.len() - 1;
        linalg::dot(&self.coefficients[..k], &v[..k]) + self.coefficients[k]
    }

    /// Euclidean norm of the horizontal coefficients; the Lipschitz constant
    /// for the gauge metric.
    pub fn lipschitz(&self) -> f64 {
        linalg::norm(&self.coefficients[..self.coefficients.len() - 1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub function: AffineFunction,
    /// `‖f − h‖_{L2(Q)}`.
    pub residual: f64,
    pub rank: usize,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceFit {
    pub slice: usize,
    pub nodes: usize,
    pub rank: usize,
    /// Too few nodes for an affine fit; a constant was fitted instead.
    pub constant_only: bool,
    pub residual_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceAffineFit {
    /// `(Σ_slices residual²)^{1/2}`.
    pub residual: f64,
    pub slices: Vec<SliceFit>,
    pub flagged: usize,
    pub nodes: usize,
}

pub(crate) struct Nodes {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub weight: f64,
    pub slices: Vec<usize>,
}

/// Collects quadrature nodes of `q` and the field values on them. Nodes
/// falling outside the field's domain are an error.
pub(crate) fn nodes(f: &dyn Field, q: &QuasiBox, quad: Quadrature, slicing: Option<&[f64]>) -> Result<Nodes> {
    if f.dim() != 2 * q.n() {
        return Err(HsError::DimensionMismatch { expected: 2 * q.n(), found: f.dim() });
    }
    let (points, weight, slices) = match quad {
        Quadrature::Lattice { per_axis } => {
            let lat = q.lattice(per_axis, slicing)?;
            (lat.points, lat.weight, lat.slices)
        }
        Quadrature::GridNodes => {
            let grid = f.grid().ok_or_else(|| {
                HsError::InvalidArgument("grid-node quadrature needs a grid-backed field".into())
            })?;
            let d = grid.dim();
            let h = (0..d - 1).map(|a| grid.spacing(a)).fold(f64::INFINITY, f64::min);
            let normal = slicing.map(<[f64]>::to_vec).unwrap_or_else(|| q.frame().normal);
            let mut pts = Vec::new();
            let mut ids = Vec::new();
            for i in 0..grid.node_count() {
                let v = grid.node(i);
                if q.contains(&v) {
                    let level = linalg::dot(&v[..d - 1], &normal) / h;
                    ids.push((level.round() as i64 + (1 << 40)) as usize);
                    pts.push(v);
                }
            }
            (pts, grid.cell_volume(), ids)
        }
    };
    let mut values = Vec::with_capacity(points.len());
    let mut clipped = 0;
    for p in &points {
        match f.value(p) {
            Some(v) => values.push(v),
            None => clipped += 1,
        }
    }
    if clipped > 0 {
        return Err(HsError::DomainClipped { nodes: clipped });
    }
    Ok(Nodes { points, values, weight, slices })
}

/// Least squares on the columns `features(point)` plus a constant, with
/// features centred for conditioning. Returns (coefficients with the
/// constant last, rank, Σ residual²).
pub(crate) fn fit_columns(rows: &[Vec<f64>], values: &[f64]) -> (Vec<f64>, usize, f64) {
    let m = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; k];
    for r in rows {
        linalg::axpy(1.0 / m as f64, r, &mut mean);
    }
    let a = DMatrix::from_fn(m, k + 1, |i, j| if j < k { rows[i][j] - mean[j] } else { 1.0 });
    let b = DVector::from_column_slice(values);
    let (x, rank) = linalg::lstsq(&a, &b);
    let resid = (&a * &x - &b).norm_squared();
    let mut coeffs: Vec<f64> = x.iter().cloned().collect();
    coeffs[k] -= linalg::dot(&coeffs[..k], &mean);
    (coeffs, rank, resid)
}

/// Best affine approximation of `f` in `L2(Q)`, on the field's grid nodes.
pub fn best_affine_fit(f: &dyn Field, q: &QuasiBox) -> Result<AffineFit> {
    best_affine_fit_with(f, q, Quadrature::GridNodes)
}

pub fn best_affine_fit_with(f: &dyn Field, q: &QuasiBox, quad: Quadrature) -> Result<AffineFit> {
    let nodes = nodes(f, q, quad, None)?;
    let needed = 2 * q.n() + 1;
    if nodes.points.len() < needed {
        return Err(HsError::TooFewSamples { got: nodes.points.len(), needed });
    }
    let d = f.dim();
    let rows: Vec<Vec<f64>> = nodes.points.iter().map(|p| p[..d - 1].to_vec()).collect();
    let (coefficients, rank, resid) = fit_columns(&rows, &nodes.values);
    Ok(AffineFit {
        function: AffineFunction { coefficients },
        residual: (resid * nodes.weight).sqrt(),
        rank,
        nodes: nodes.points.len(),
    })
}

/// Best `P`-slice-affine approximation of `f` in `L2(Q)`: an independent
/// affine fit on each coset of `P` met by the quadrature. `P` must be a
/// vertical hyperplane of `V_0`.
pub fn best_slice_affine_fit(f: &dyn Field, q: &QuasiBox, plane: &VerticalSubspaceBasis) -> Result<SliceAffineFit> {
    best_slice_affine_fit_with(f, q, plane, Quadrature::GridNodes)
}

pub fn best_slice_affine_fit_with(
    f: &dyn Field,
    q: &QuasiBox,
    plane: &VerticalSubspaceBasis,
    quad: Quadrature,
) -> Result<SliceAffineFit> {
    if plane.n() != q.n() {
        return Err(HsError::DimensionMismatch { expected: q.n(), found: plane.n() });
    }
    let normal = plane.normal_in_v0()?;
    let tangent = linalg::complement(std::slice::from_ref(&normal), normal.len());
    let nodes = nodes(f, q, quad, Some(&normal))?;
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in nodes.slices.iter().enumerate() {
        groups.entry(*s).or_default().push(i);
    }
    let dim_p = plane.dim();
    let mut slices = Vec::with_capacity(groups.len());
    let mut total = 0.0;
    for (slice, members) in groups {
        let values: Vec<f64> = members.iter().map(|&i| nodes.values[i]).collect();
        let constant_only = members.len() < dim_p;
        let rows: Vec<Vec<f64>> = if constant_only {
            vec![Vec::new(); members.len()]
        } else {
            members
                .iter()
                .map(|&i| {
                    let a = &nodes.points[i][..normal.len()];
                    tangent.iter().map(|t| linalg::dot(a, t)).collect()
                })
                .collect()
        };
        let (_, rank, resid) = fit_columns(&rows, &values);
        let residual_sq = resid * nodes.weight;
        total += residual_sq;
        slices.push(SliceFit { slice, nodes: members.len(), rank, constant_only, residual_sq });
    }
    let flagged = slices.iter().filter(|s| s.constant_only).count();
    Ok(SliceAffineFit { residual: total.sqrt(), slices, flagged, nodes: nodes.points.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heisenberg::{plane_p_w, HPoint, HorizontalDirection};

    fn unit_box() -> QuasiBox {
        QuasiBox::new(HorizontalDirection::y_n(2), HPoint::origin(2), 1.0).unwrap()
    }

    #[test]
    fn affine_fields_are_recovered() {
        let coeffs = [0.5, -1.0, 2.0, 0.25];
        let f = FnField { dim: 4, f: |v: &[f64]| 0.5 * v[0] - v[1] + 2.0 * v[2] + 0.25 };
        let fit = best_affine_fit_with(&f, &unit_box(), Quadrature::Lattice { per_axis: 6 }).unwrap();
        assert!(fit.residual < 1e-10);
        for (a, b) in fit.function.coefficients.iter().zip(coeffs) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(fit.rank, 4);
    }

    #[test]
    fn slice_affine_fields_fit_exactly_on_slices() {
        // Slices of P_{Y_2} are the level sets of x_2; the slope in y_1
        // varies with x_2, so the field is slice-affine but not affine.
        let f = FnField { dim: 4, f: |v: &[f64]| v[1] * v[1] + v[1] * v[2] - v[0] };
        let q = unit_box();
        let plane = plane_p_w(q.w());
        let quad = Quadrature::Lattice { per_axis: 8 };
        let saff = best_slice_affine_fit_with(&f, &q, &plane, quad).unwrap();
        let aff = best_affine_fit_with(&f, &q, quad).unwrap();
        assert!(saff.residual < 1e-10, "{}", saff.residual);
        assert!(aff.residual > 1e-2);
        assert_eq!(saff.flagged, 0);
    }
}
