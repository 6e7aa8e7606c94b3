//! Dyadic cell-midpoint grids over boxes and the on-disk container format.
//!
//! A grid with `resolution` cells per axis samples a function at the cell
//! midpoints. Values are stored row-major with the last axis varying
//! fastest. Interpolation is multilinear between midpoints and extends
//! linearly into the boundary half-cells, so affine functions are reproduced
//! exactly everywhere in the box.
//!
//! Container layout (all integers little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | magic `HSLGRID1` |
//! | 8 | header length `L` (u64) |
//! | L | UTF-8 JSON header |
//! | 8 | value count `N` (u64) |
//! | 8N | values as f64 |

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, HsError, Result};

pub const MAGIC: &[u8; 8] = b"HSLGRID1";

/// Axis-aligned box `[lo_0, hi_0] × … × [lo_{d−1}, hi_{d−1}]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return invalid("box bounds must be nonempty and of equal length");
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return invalid("box bounds must be finite with lo < hi");
        }
        Ok(BoxDomain { lo, hi })
    }

    /// Box centred at the origin with the given half-widths.
    pub fn centered(half: &[f64]) -> Result<Self> {
        Self::new(half.iter().map(|h| -h).collect(), half.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Whether the box `[c − half, c + half]` lies inside this box.
    pub fn contains_box(&self, c: &[f64], half: &[f64]) -> bool {
        (0..self.dim()).all(|i| c[i] - half[i] >= self.lo[i] && c[i] + half[i] <= self.hi[i])
    }

    /// Scales axis `i` about the origin by `factors[i]` (positive).
    pub fn scale_axes(&self, factors: &[f64]) -> Self {
        BoxDomain {
            lo: self.lo.iter().zip(factors).map(|(v, f)| v * f).collect(),
            hi: self.hi.iter().zip(factors).map(|(v, f)| v * f).collect(),
        }
    }

    /// Shrinks the box about its center by `factor` in every axis.
    pub fn shrink(&self, factor: f64) -> Self {
        let c = self.center();
        BoxDomain {
            lo: (0..self.dim()).map(|i| c[i] - factor * (c[i] - self.lo[i])).collect(),
            hi: (0..self.dim()).map(|i| c[i] + factor * (self.hi[i] - c[i])).collect(),
        }
    }
}

/// Tensor grid with the same number of cells along every axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicGrid {
    pub domain: BoxDomain,
    pub resolution: usize,
}

impl DyadicGrid {
    pub fn new(domain: BoxDomain, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return invalid("grid resolution must be at least 2");
        }
        Ok(DyadicGrid { domain, resolution })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.domain.width(axis) / self.resolution as f64
    }

    pub fn node_count(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.domain.volume() / self.node_count() as f64
    }

    /// Coordinate of midpoint `i` along `axis`.
    pub fn node_coord(&self, axis: usize, i: usize) -> f64 {
        self.domain.lo[axis] + (i as f64 + 0.5) * self.spacing(axis)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.resolution;
            flat /= self.resolution;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.resolution + i)
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.node_coord(a, i))
            .collect()
    }
}

/// Real values on the midpoints of a [`DyadicGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    pub grid: DyadicGrid,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(grid: DyadicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(HsError::DimensionMismatch { expected: grid.node_count(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("grid values must be finite");
        }
        Ok(ScalarGrid { grid, values })
    }

    pub fn from_fn(grid: DyadicGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.node_count()).map(|i| f(&grid.node(i))).collect();
        Self::new(grid, values)
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.grid.domain
    }

    /// Interpolated value, or `None` outside the box.
    pub fn eval(&self, p: &[f64]) -> Option<f64> {
        if !self.grid.domain.contains(p) {
            return None;
        }
        Some(self.interpolate(p))
    }

    /// Value at the nearest point of the box.
    pub fn eval_clamped(&self, p: &[f64]) -> f64 {
        let d = &self.grid.domain;
        let q: Vec<f64> = (0..d.dim()).map(|i| p[i].clamp(d.lo[i], d.hi[i])).collect();
        self.interpolate(&q)
    }

    fn interpolate(&self, p: &[f64]) -> f64 {
        let g = &self.grid;
        let d = g.dim();
        let res = g.resolution;
        assert!(d <= 8, "interpolation supports at most 8 axes");
        let mut frac = [0.0f64; 8];
        let mut stride = [0usize; 8];
        let mut base = 0usize;
        for a in 0..d {
            let t = (p[a] - g.domain.lo[a]) / g.spacing(a) - 0.5;
            let i0 = (t.floor().max(0.0) as usize).min(res - 2);
            frac[a] = t - i0 as f64;
            base = base * res + i0;
        }
        let mut s = 1;
        for a in (0..d).rev() {
            stride[a] = s;
            s *= res;
        }
        if d <= 4 {
            lerp_cell::<16>(&self.values, base, &frac[..d], &stride[..d])
        } else {
            lerp_cell::<256>(&self.values, base, &frac[..d], &stride[..d])
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarGrid { grid: self.grid.clone(), values: self.values.iter().map(|v| f(*v)).collect() }
    }
}

/// Multilinear interpolation over the cell whose lowest corner is `base`,
/// for `2^d ≤ N` corners. Weights and offsets are expanded one axis at a
/// time, so after `a` axes slot `c` holds the corner with bits `c`.
fn lerp_cell<const N: usize>(values: &[f64], base: usize, frac: &[f64], stride: &[usize]) -> f64 {
    let mut weights = [0.0f64; N];
    let mut offsets = [0usize; N];
    weights[0] = 1.0;
    let mut count = 1;
    for (&t, &s) in frac.iter().zip(stride) {
        for c in (0..count).rev() {
            let (w, o) = (weights[c], offsets[c]);
            weights[2 * c] = w * (1.0 - t);
            weights[2 * c + 1] = w * t;
            offsets[2 * c] = o;
            offsets[2 * c + 1] = o + s;
        }
        count *= 2;
    }
    let corners = &values[base..];
    weights[..count].iter().zip(&offsets[..count]).map(|(w, o)| w * corners[*o]).sum()
}

#[derive(Serialize, Deserialize)]
struct JsonContainer<H> {
    header: H,
    values: Vec<f64>,
}

/// Writes the binary container.
pub fn write_container<H: Serialize>(mut out: impl Write, header: &H, values: &[f64]) -> Result<()> {
    let header = serde_json::to_vec(header)?;
    out.write_all(MAGIC)?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    out.write_all(&(values.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_u64(input: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads the binary container, returning the header and the raw values.
pub fn read_container<H: DeserializeOwned>(mut input: impl Read) -> Result<(H, Vec<f64>)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(HsError::Format("bad magic".into()));
    }
    let len = read_u64(&mut input)? as usize;
    if len > 1 << 24 {
        return Err(HsError::Format("header too large".into()));
    }
    let mut header = vec![0u8; len];
    input.read_exact(&mut header)?;
    let header: H = serde_json::from_slice(&header)?;
    let count = read_u64(&mut input)? as usize;
    if count > 1 << 32 {
        return Err(HsError::Format("value count too large".into()));
    }
    let mut raw = vec![0u8; count * 8];
    input.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, values))
}

/// JSON debug form `{"header": …, "values": […]}`.
pub fn container_to_json<H: Serialize>(header: &H, values: &[f64]) -> Result<String> {
    #[derive(Serialize)]
    struct Borrowed<'a, H> {
        header: &'a H,
        values: &'a [f64],
    }
    Ok(serde_json::to_string_pretty(&Borrowed { header, values })?)
}

pub fn container_from_json<H: DeserializeOwned>(text: &str) -> Result<(H, Vec<f64>)> {
    let c: JsonContainer<H> = serde_json::from_str(text)?;
    Ok((c.header, c.values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(d: usize, res: usize) -> DyadicGrid {
        DyadicGrid::new(BoxDomain::centered(&vec![1.5; d]).unwrap(), res).unwrap()
    }

    #[test]
    fn index_round_trip() {
        let g = grid(3, 4);
        for i in 0..g.node_count() {
            assert_eq!(g.flat_index(&g.multi_index(i)), i);
        }
        assert_eq!(g.node(0), vec![-1.5 + 0.375; 3]);
    }

    #[test]
    fn affine_functions_are_reproduced_to_the_boundary() {
        let f = |p: &[f64]| 0.3 + 2.0 * p[0] - p[1] + 0.25 * p[2];
        let s = ScalarGrid::from_fn(grid(3, 8), f).unwrap();
        for p in [[1.5, -1.5, 1.5], [0.1, 0.2, -1.49], [-1.5, 1.5, 0.0]] {
            assert!((s.eval(&p).unwrap() - f(&p)).abs() < 1e-12);
        }
        assert!(s.eval(&[1.6, 0.0, 0.0]).is_none());
        assert!((s.eval_clamped(&[1.6, 0.0, 0.0]) - f(&[1.5, 0.0, 0.0])).abs() < 1e-12);
    }

    #[test]
    fn bilinear_term_is_exact_at_nodes() {
        let f = |p: &[f64]| p[0] * p[1];
        let s = ScalarGrid::from_fn(grid(2, 8), f).unwrap();
        for i in 0..s.grid.node_count() {
            let p = s.grid.node(i);
            assert!((s.eval(&p).unwrap() - f(&p)).abs() < 1e-12);
        }
    }

    #[test]
    fn container_round_trip() {
        let s = ScalarGrid::from_fn(grid(2, 4), |p| p[0] - 3.0 * p[1]).unwrap();
        let mut buf = Vec::new();
        write_container(&mut buf, &s.grid, &s.values).unwrap();
        let (g, v): (DyadicGrid, Vec<f64>) = read_container(&buf[..]).unwrap();
        assert_eq!(g, s.grid);
        assert_eq!(v, s.values);
        let text = container_to_json(&s.grid, &s.values).unwrap();
        let (g2, v2): (DyadicGrid, Vec<f64>) = container_from_json(&text).unwrap();
        assert_eq!((g2, v2), (s.grid.clone(), s.values.clone()));
        buf[0] = b'X';
        assert!(read_container::<DyadicGrid>(&buf[..]).is_err());
    }
}
