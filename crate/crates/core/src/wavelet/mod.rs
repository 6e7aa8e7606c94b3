//! Tensor Haar analysis on `[-1,1]^d` and the affine / slice-affine
//! projections built on top of it.
//!
//! A [`GridFunction`] of level `J` holds `2^J` cell-midpoint samples per axis.
//! Inner products weight each cell by its volume, which makes the discrete
//! Haar system through level `J` an exact orthogonal basis.

mod haar;
mod projection;
mod vertical;

pub use haar::{analyze, decompose_by_support, haar_1d, synthesize, HaarCoeffs, HaarStep, SupportDecomposition};
pub use projection::{project_affine, project_slice_affine, verify_identities, IdentityCheck, IdentityReport};
pub use vertical::{
    default_directions, slicing_vertical_reduce, vertical_hyperplane, ReductionReport, ReductionSettings, CONDITION_LIMIT,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, HsError, Result};
use crate::grid::{self, BoxDomain, DyadicGrid, ScalarGrid};

/// Cell-midpoint samples of a function on `[-1,1]^d`, `2^J` per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    d: usize,
    level: usize,
    values: Vec<f64>,
}

/// Header stored in the grid container for a [`GridFunction`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFunctionHeader {
    pub kind: String,
    pub d: usize,
    pub level: usize,
    #[serde(rename = "box")]
    pub domain: BoxDomain,
}

const KIND: &str = "grid-function";

impl GridFunction {
    pub fn new(d: usize, level: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 || level == 0 {
            return invalid("grid functions need d ≥ 1 and J ≥ 1");
        }
        if level * d > 40 {
            return invalid("grid too large");
        }
        let expected = 1usize << (level * d);
        if values.len() != expected {
            return Err(HsError::DimensionMismatch { expected, found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("grid values must be finite");
        }
        Ok(GridFunction { d, level, values })
    }

    pub fn zeros(d: usize, level: usize) -> Result<Self> {
        if d == 0 || level == 0 || level * d > 40 {
            return Self::new(d, level, Vec::new());
        }
        Self::new(d, level, vec![0.0; 1usize << (level * d)])
    }

    /// Samples `f` at the cell midpoints.
    pub fn from_fn(d: usize, level: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut out = Self::zeros(d, level)?;
        for i in 0..out.len() {
            let t = out.point(i);
            out.values[i] = f(&t);
        }
        if out.values.iter().any(|v| !v.is_finite()) {
            return invalid("sampled values must be finite");
        }
        Ok(out)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Cells per axis, `2^J`.
    pub fn side(&self) -> usize {
        1 << self.level
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn cell_volume(&self) -> f64 {
        (2.0 / self.side() as f64).powi(self.d as i32)
    }

    /// Midpoint coordinate of index `i` along any axis.
    pub fn midpoint(&self, i: usize) -> f64 {
        -1.0 + (i as f64 + 0.5) * 2.0 / self.side() as f64
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let side = self.side();
        let mut idx = vec![0; self.d];
        for a in (0..self.d).rev() {
            idx[a] = flat % side;
            flat /= side;
        }
        idx
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).into_iter().map(|i| self.midpoint(i)).collect()
    }

    /// Value of the step function at an arbitrary point of `[-1,1]^d`.
    pub fn eval(&self, t: &[f64]) -> Result<f64> {
        if t.len() != self.d {
            return Err(HsError::DimensionMismatch { expected: self.d, found: t.len() });
        }
        let side = self.side();
        let mut flat = 0;
        for &c in t {
            if !(-1.0..=1.0).contains(&c) {
                return Err(HsError::OutOfDomain);
            }
            let i = (((c + 1.0) * 0.5 * side as f64) as usize).min(side - 1);
            flat = flat * side + i;
        }
        Ok(self.values[flat])
    }

    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.cell_volume()
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> Self {
        GridFunction { d: self.d, level: self.level, values: self.values.iter().map(|v| v * s).collect() }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!((self.d, self.level), (other.d, other.level), "grid shapes differ");
        GridFunction {
            d: self.d,
            level: self.level,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn header(&self) -> GridFunctionHeader {
        GridFunctionHeader {
            kind: KIND.into(),
            d: self.d,
            level: self.level,
            domain: BoxDomain::centered(&vec![1.0; self.d]).expect("unit cube"),
        }
    }

    /// The same samples as a [`ScalarGrid`] with multilinear interpolation.
    pub fn to_scalar_grid(&self) -> ScalarGrid {
        let grid = DyadicGrid::new(self.header().domain, self.side()).expect("side ≥ 2");
        ScalarGrid { grid, values: self.values.clone() }
    }

    pub fn write_binary(&self, out: impl std::io::Write) -> Result<()> {
        grid::write_container(out, &self.header(), &self.values)
    }

    pub fn read_binary(input: impl std::io::Read) -> Result<Self> {
        let (h, v): (GridFunctionHeader, Vec<f64>) = grid::read_container(input)?;
        Self::from_parts(h, v)
    }

    pub fn to_json(&self) -> Result<String> {
        grid::container_to_json(&self.header(), &self.values)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let (h, v): (GridFunctionHeader, Vec<f64>) = grid::container_from_json(text)?;
        Self::from_parts(h, v)
    }

    fn from_parts(h: GridFunctionHeader, values: Vec<f64>) -> Result<Self> {
        if h.kind != KIND {
            return Err(HsError::Format(format!("expected a {KIND} container, found {}", h.kind)));
        }
        if h.domain != BoxDomain::centered(&vec![1.0; h.d])? {
            return Err(HsError::Format("grid functions live on [-1,1]^d".into()));
        }
        Self::new(h.d, h.level, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_and_container_round_trip() {
        let g = GridFunction::from_fn(3, 2, |t| t[0] - 2.0 * t[1] * t[2]).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.point(0), vec![-0.75; 3]);
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        assert_eq!(GridFunction::read_binary(&buf[..]).unwrap(), g);
        assert_eq!(GridFunction::from_json(&g.to_json().unwrap()).unwrap(), g);
        assert!(GridFunction::new(3, 2, vec![0.0; 63]).is_err());
        assert!(GridFunction::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn step_evaluation_matches_samples() {
        let g = GridFunction::from_fn(2, 3, |t| t[0] + 10.0 * t[1]).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.eval(&g.point(i)).unwrap(), g.values()[i]);
        }
        assert!(g.eval(&[1.5, 0.0]).is_err());
    }
}
