use serde::{Deserialize, Serialize};

use super::haar::{analyze, split_by_support_size};
use super::GridFunction;
use crate::error::{invalid, Result};

/// Orthogonal projection onto `span{1, t_1, …, t_d}`.
///
/// On the symmetric midpoint grid the monomials `1, t_1, …, t_d` are mutually
/// orthogonal, so each coefficient is a single quotient of sums.
pub fn project_affine(g: &GridFunction) -> GridFunction {
    let d = g.d();
    let side = g.side();
    let total = g.len() as f64;
    let sq: f64 = (0..side).map(|i| g.midpoint(i).powi(2)).sum::<f64>() * total / side as f64;
    let mean = g.values().iter().sum::<f64>() / total;
    let mut slope = vec![0.0; d];
    for f in 0..g.len() {
        let t = g.point(f);
        for a in 0..d {
            slope[a] += g.values()[f] * t[a];
        }
    }
    slope.iter_mut().for_each(|s| *s /= sq);
    GridFunction::from_fn(d, g.level(), |t| mean + t.iter().zip(&slope).map(|(x, b)| x * b).sum::<f64>())
        .expect("shape preserved")
}

/// Orthogonal projection onto functions that are affine in the remaining
/// coordinates on every slice `{t_axis = const}`. Axes are 0-based.
pub fn project_slice_affine(g: &GridFunction, axis: usize) -> Result<GridFunction> {
    let d = g.d();
    if axis >= d {
        return invalid(format!("axis {axis} out of range for d = {d}"));
    }
    let side = g.side();
    let per_slice = (g.len() / side) as f64;
    let sq: f64 = (0..side).map(|i| g.midpoint(i).powi(2)).sum::<f64>() * per_slice / side as f64;
    let mut mean = vec![0.0; side];
    let mut slope = vec![vec![0.0; d]; side];
    for f in 0..g.len() {
        let idx = g.multi_index(f);
        let s = idx[axis];
        let v = g.values()[f];
        mean[s] += v;
        for a in (0..d).filter(|&a| a != axis) {
            slope[s][a] += v * g.midpoint(idx[a]);
        }
    }
    let mut out = g.clone();
    for f in 0..g.len() {
        let idx = g.multi_index(f);
        let s = idx[axis];
        let mut v = mean[s] / per_slice;
        for a in (0..d).filter(|&a| a != axis) {
            v += slope[s][a] / sq * g.midpoint(idx[a]);
        }
        out.values_mut()[f] = v;
    }
    Ok(out)
}

/// One line of an [`IdentityReport`]. Equalities have `lower == upper`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub d: usize,
    pub level: usize,
    pub checks: Vec<IdentityCheck>,
    pub passed: bool,
}

pub const IDENTITY_RTOL: f64 = 1e-9;

fn check(name: String, value: f64, lower: f64, upper: f64, floor: f64) -> IdentityCheck {
    let tol = IDENTITY_RTOL * value.abs().max(lower.abs()).max(upper.abs()) + floor;
    let passed = value >= lower - tol && value <= upper + tol;
    IdentityCheck { name, value, lower, upper, passed }
}

/// Checks the regression identities that compare affine and slice-affine
/// approximation on the cube, for a grid function with `d ≥ 3`:
///
/// * `regression`: `‖g−λg‖² = ‖g₁−λg₁‖² + Σ_{i≥2}‖g_i‖²`
/// * `sliced_regression[l]`: `‖g−λ_l g‖² = ‖g₁−λ_l g₁‖² + ‖g₂−λ_l g₂‖² + Σ_{i≥3}‖g_i‖²`
/// * `first_order`: `Σ_l ‖g₁−λ_l g₁‖² = (d−1)‖g₁−λg₁‖²`
/// * `second_order`: `(d−2)‖g₂‖² ≤ Σ_l ‖g₂−λ_l g₂‖² ≤ d‖g₂‖²`
/// * `global`: `(d−2)‖g−λg‖² ≤ Σ_l ‖g−λ_l g‖² ≤ d‖g−λg‖²`
pub fn verify_identities(g: &GridFunction) -> Result<IdentityReport> {
    let d = g.d();
    if d < 3 {
        return invalid("the identity suite needs d ≥ 3");
    }
    let floor = 1e-13 * g.norm_sq();
    let parts = split_by_support_size(&analyze(g));
    let (g1, g2) = (&parts[1], &parts[2]);
    let higher: f64 = parts[3..].iter().map(GridFunction::norm_sq).sum();

    let resid = |h: &GridFunction, p: &GridFunction| h.sub(p).norm_sq();
    let affine_g = resid(g, &project_affine(g));
    let affine_g1 = resid(g1, &project_affine(g1));
    let norm_g2 = g2.norm_sq();

    let mut checks = vec![check("regression".into(), affine_g, affine_g1 + norm_g2 + higher, affine_g1 + norm_g2 + higher, floor)];
    let (mut sum_g, mut sum_g1, mut sum_g2) = (0.0, 0.0, 0.0);
    for l in 0..d {
        let sg = resid(g, &project_slice_affine(g, l)?);
        let sg1 = resid(g1, &project_slice_affine(g1, l)?);
        let sg2 = resid(g2, &project_slice_affine(g2, l)?);
        let rhs = sg1 + sg2 + higher;
        checks.push(check(format!("sliced_regression[{l}]"), sg, rhs, rhs, floor));
        sum_g += sg;
        sum_g1 += sg1;
        sum_g2 += sg2;
    }
    let df = d as f64;
    checks.push(check("first_order".into(), sum_g1, (df - 1.0) * affine_g1, (df - 1.0) * affine_g1, floor));
    checks.push(check("second_order".into(), sum_g2, (df - 2.0) * norm_g2, df * norm_g2, floor));
    checks.push(check("global".into(), sum_g, (df - 2.0) * affine_g, df * affine_g, floor));
    let passed = checks.iter().all(|c| c.passed);
    Ok(IdentityReport { d, level: g.level(), checks, passed })
}
