use std::collections::BTreeMap;

use super::GridFunction;
use crate::error::{invalid, HsError, Result};

/// One-dimensional Haar function `ψ_{j,k}` on `[-1,1]`.
///
/// `ψ_{0,0} ≡ 1`. For `j ≥ 1` and `0 ≤ k < 2^{j−1}` the function is `−1` on
/// the left half and `+1` on the right half of an interval of width
/// `2^{−j+2}` starting at `−1 + k·2^{−j+2}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HaarStep {
    pub j: usize,
    pub k: usize,
}

pub fn haar_1d(j: usize, k: usize) -> Result<HaarStep> {
    let valid = if j == 0 { k == 0 } else { j <= 60 && k < (1usize << (j - 1)) };
    if !valid {
        return invalid(format!("invalid Haar index (j={j}, k={k})"));
    }
    Ok(HaarStep { j, k })
}

impl HaarStep {
    pub fn eval(&self, t: f64) -> f64 {
        if self.j == 0 {
            return if (-1.0..=1.0).contains(&t) { 1.0 } else { 0.0 };
        }
        let half = 2f64.powi(1 - self.j as i32);
        let a = 2.0 * self.k as f64 * half - 1.0;
        if t >= a && t < a + half {
            -1.0
        } else if t >= a + half && t < a + 2.0 * half {
            1.0
        } else {
            0.0
        }
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        if self.j == 0 {
            return (-1.0, 1.0);
        }
        let width = 2f64.powi(2 - self.j as i32);
        let a = -1.0 + self.k as f64 * width;
        (a, a + width)
    }

    /// Position in the level-`J` ordering: `0 ↦ (0,0)`, and indices in
    /// `[2^{j−1}, 2^j)` enumerate level `j`.
    pub fn flat(&self) -> usize {
        if self.j == 0 {
            0
        } else {
            (1 << (self.j - 1)) + self.k
        }
    }

    pub fn from_flat(m: usize) -> Self {
        if m == 0 {
            HaarStep { j: 0, k: 0 }
        } else {
            let j = (usize::BITS - m.leading_zeros()) as usize;
            HaarStep { j, k: m - (1 << (j - 1)) }
        }
    }
}

/// Sampled 1-D basis for a given level: `rows[m][i] = ψ_m(t_i)` and the
/// squared discrete norms.
struct Basis1d {
    side: usize,
    rows: Vec<Vec<f64>>,
    norm_sq: Vec<f64>,
}

impl Basis1d {
    fn new(level: usize) -> Self {
        let side = 1usize << level;
        let h = 2.0 / side as f64;
        let rows: Vec<Vec<f64>> = (0..side)
            .map(|m| {
                let psi = HaarStep::from_flat(m);
                (0..side).map(|i| psi.eval(-1.0 + (i as f64 + 0.5) * h)).collect()
            })
            .collect();
        let norm_sq = rows.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
        Basis1d { side, rows, norm_sq }
    }
}

/// Applies `op` to every fiber of `values` along `axis`.
fn for_each_fiber(values: &mut [f64], d: usize, side: usize, axis: usize, mut op: impl FnMut(&mut [f64])) {
    let stride = side.pow((d - 1 - axis) as u32);
    let block = stride * side;
    let mut fiber = vec![0.0; side];
    for start in (0..values.len()).step_by(block) {
        for offset in 0..stride {
            let base = start + offset;
            for i in 0..side {
                fiber[i] = values[base + i * stride];
            }
            op(&mut fiber);
            for i in 0..side {
                values[base + i * stride] = fiber[i];
            }
        }
    }
}

/// Tensor Haar coefficients `c_{j,k}` stored in the same flat layout as the
/// grid, with the 1-D index of each axis given by [`HaarStep::flat`].
#[derive(Clone, Debug, PartialEq)]
pub struct HaarCoeffs {
    d: usize,
    level: usize,
    values: Vec<f64>,
}

impl HaarCoeffs {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn raw(&self) -> &[f64] {
        &self.values
    }

    fn side(&self) -> usize {
        1 << self.level
    }

    fn flat(&self, j: &[usize], k: &[usize]) -> Result<usize> {
        if j.len() != self.d || k.len() != self.d {
            return Err(HsError::DimensionMismatch { expected: self.d, found: j.len().min(k.len()) });
        }
        let mut flat = 0;
        for (&ji, &ki) in j.iter().zip(k) {
            if ji > self.level {
                return invalid(format!("level {ji} exceeds grid level {}", self.level));
            }
            flat = flat * self.side() + haar_1d(ji, ki)?.flat();
        }
        Ok(flat)
    }

    /// Coefficient of `Ψ_{j,k}`.
    pub fn get(&self, j: &[usize], k: &[usize]) -> Result<f64> {
        Ok(self.values[self.flat(j, k)?])
    }

    pub fn set(&mut self, j: &[usize], k: &[usize], c: f64) -> Result<()> {
        let f = self.flat(j, k)?;
        self.values[f] = c;
        Ok(())
    }

    pub fn zeros(d: usize, level: usize) -> Result<Self> {
        let g = GridFunction::zeros(d, level)?;
        Ok(HaarCoeffs { d, level, values: g.values().to_vec() })
    }

    /// Per-axis `(j, k)` pairs of flat entry `flat`.
    pub fn index(&self, flat: usize) -> Vec<HaarStep> {
        let side = self.side();
        let mut out = vec![HaarStep { j: 0, k: 0 }; self.d];
        let mut rest = flat;
        for a in (0..self.d).rev() {
            out[a] = HaarStep::from_flat(rest % side);
            rest /= side;
        }
        out
    }

    /// Bitmask of the axes with `j_i ≠ 0`.
    pub fn support_mask(&self, flat: usize) -> u32 {
        let side = self.side();
        let mut mask = 0u32;
        let mut rest = flat;
        for a in (0..self.d).rev() {
            if !rest.is_multiple_of(side) {
                mask |= 1 << a;
            }
            rest /= side;
        }
        mask
    }

    /// `‖Ψ_{j,k}‖²` for flat entry `flat`.
    pub fn basis_norm_sq(&self, flat: usize) -> f64 {
        self.index(flat)
            .iter()
            .map(|s| if s.j == 0 { 2.0 } else { 2f64.powi(2 - s.j as i32) })
            .product()
    }

    /// `Σ c² ‖Ψ‖²`, equal to `‖g‖²` by Parseval.
    pub fn energy(&self) -> f64 {
        (0..self.values.len()).map(|f| self.values[f].powi(2) * self.basis_norm_sq(f)).sum()
    }

    /// Copy keeping only entries whose support mask satisfies `keep`.
    pub fn filtered(&self, keep: impl Fn(u32) -> bool) -> Self {
        let mut out = self.clone();
        for f in 0..out.values.len() {
            if !keep(self.support_mask(f)) {
                out.values[f] = 0.0;
            }
        }
        out
    }
}

/// `c_{j,k} = ⟨g, Ψ_{j,k}⟩ / ⟨Ψ_{j,k}, Ψ_{j,k}⟩` for all indices through the
/// grid level.
pub fn analyze(g: &GridFunction) -> HaarCoeffs {
    let basis = Basis1d::new(g.level());
    let mut values = g.values().to_vec();
    let mut out = vec![0.0; basis.side];
    for axis in 0..g.d() {
        for_each_fiber(&mut values, g.d(), basis.side, axis, |fiber| {
            for (m, row) in basis.rows.iter().enumerate() {
                out[m] = row.iter().zip(fiber.iter()).map(|(a, b)| a * b).sum::<f64>() / basis.norm_sq[m];
            }
            fiber.copy_from_slice(&out);
        });
    }
    HaarCoeffs { d: g.d(), level: g.level(), values }
}

/// Inverse of [`analyze`].
pub fn synthesize(c: &HaarCoeffs) -> GridFunction {
    let basis = Basis1d::new(c.level);
    let mut values = c.values.clone();
    let mut out = vec![0.0; basis.side];
    for axis in 0..c.d {
        for_each_fiber(&mut values, c.d, basis.side, axis, |fiber| {
            out.iter_mut().for_each(|v| *v = 0.0);
            for (m, row) in basis.rows.iter().enumerate() {
                let cm = fiber[m];
                if cm != 0.0 {
                    for (o, r) in out.iter_mut().zip(row) {
                        *o += cm * r;
                    }
                }
            }
            fiber.copy_from_slice(&out);
        });
    }
    GridFunction::new(c.d, c.level, values).expect("shape preserved")
}

/// Pieces of `g` grouped by the support of their Haar indices.
#[derive(Clone, Debug)]
pub struct SupportDecomposition {
    /// `f_S` keyed by the sorted list of 0-based axes in `S`.
    pub f_s: BTreeMap<Vec<usize>, GridFunction>,
    /// `g_i` for `i = 0..=d`.
    pub g: Vec<GridFunction>,
}

fn mask_axes(mask: u32, d: usize) -> Vec<usize> {
    (0..d).filter(|a| mask & (1 << a) != 0).collect()
}

pub fn decompose_by_support(c: &HaarCoeffs) -> SupportDecomposition {
    let d = c.d;
    let mut f_s = BTreeMap::new();
    let mut g: Vec<GridFunction> = (0..=d).map(|_| GridFunction::zeros(d, c.level).expect("valid shape")).collect();
    for mask in 0..(1u32 << d) {
        let piece = synthesize(&c.filtered(|m| m == mask));
        let size = mask.count_ones() as usize;
        g[size] = g[size].add(&piece);
        f_s.insert(mask_axes(mask, d), piece);
    }
    SupportDecomposition { f_s, g }
}

/// `g_0, …, g_d` without materialising every `f_S`.
pub(crate) fn split_by_support_size(c: &HaarCoeffs) -> Vec<GridFunction> {
    (0..=c.d)
        .map(|i| synthesize(&c.filtered(|m| m.count_ones() as usize == i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_examples() {
        let p00 = haar_1d(0, 0).unwrap();
        assert_eq!(p00.eval(0.3), 1.0);
        let p10 = haar_1d(1, 0).unwrap();
        assert_eq!(p10.eval(-0.5), -1.0);
        assert_eq!(p10.eval(0.5), 1.0);
        assert_eq!(haar_1d(3, 1).unwrap().support(), (-0.5, 0.0));
        assert!(haar_1d(2, 2).is_err());
        assert!(haar_1d(0, 1).is_err());
        for m in 0..64 {
            assert_eq!(HaarStep::from_flat(m).flat(), m);
        }
    }

    #[test]
    fn discrete_norms_match_continuum() {
        let c = HaarCoeffs::zeros(1, 4).unwrap();
        let b = Basis1d::new(4);
        let h = 2.0 / 16.0;
        for m in 0..16 {
            assert!((c.basis_norm_sq(m) - b.norm_sq[m] * h).abs() < 1e-14);
        }
    }

    #[test]
    fn single_basis_function_has_unit_coefficient() {
        let j = [2, 0, 3];
        let k = [1, 0, 2];
        let steps: Vec<HaarStep> = j.iter().zip(&k).map(|(&j, &k)| haar_1d(j, k).unwrap()).collect();
        let g = GridFunction::from_fn(3, 3, |t| steps.iter().zip(t).map(|(s, &x)| s.eval(x)).product()).unwrap();
        let c = analyze(&g);
        for f in 0..c.raw().len() {
            let expected = if c.index(f) == steps { 1.0 } else { 0.0 };
            assert!((c.raw()[f] - expected).abs() < 1e-12);
        }
        assert_eq!(c.get(&j, &k).unwrap(), 1.0);
        assert!(c.get(&[4, 0, 0], &[0, 0, 0]).is_err());
    }

    #[test]
    fn constant_grid_has_only_mean_coefficient() {
        let g = GridFunction::from_fn(2, 3, |_| 2.5).unwrap();
        let c = analyze(&g);
        assert!((c.raw()[0] - 2.5).abs() < 1e-14);
        assert!(c.raw()[1..].iter().all(|v| v.abs() < 1e-14));
    }
}
