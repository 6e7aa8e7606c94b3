//! Randomized suites for the group algebra and the cube identities.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::heisenberg::{project_along, HPoint, HorizontalDirection};
use crate::rng;
use crate::wavelet::{verify_identities, GridFunction};

/// Absolute tolerance of the algebraic checks.
pub const ALGEBRA_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub n: usize,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraicReport {
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

fn sup_diff(a: &HPoint, b: &HPoint) -> f64 {
    let d = a.project_pi().iter().zip(b.project_pi()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    d.max((a.z - b.z).abs())
}

fn random_point(n: usize, rng: &mut impl Rng) -> HPoint {
    let x = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    HPoint::new(x, y, rng.random_range(-2.0..2.0)).expect("finite")
}

/// Group axioms, dilations, the commutator identity and invariance of the
/// projections along horizontal directions, on `instances` random inputs for
/// each `n` in `ns`.
pub fn run_algebraic_suite(ns: &[usize], instances: usize, seed: u64) -> AlgebraicReport {
    const NAMES: [&str; 6] = ["associativity", "inverse", "dilation_homomorphism", "dilation_metric", "commutator", "projection_invariance"];
    let mut checks = Vec::new();
    for &n in ns {
        let errors: Vec<[f64; 6]> = (0..instances)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::stream(seed, &[0xA1, n as u64, i as u64]);
                let (g, h, k) = (random_point(n, &mut rng), random_point(n, &mut rng), random_point(n, &mut rng));
                let t: f64 = rng.random_range(0.1..3.0);
                let mut wh: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
                wh[2 * n - 1] = 1.0;
                let w = HorizontalDirection::from_horizontal(&wh).expect("y_n = 1");
                let e = HPoint::origin(n);
                let assoc = sup_diff(&(&(&g * &h) * &k), &(&g * &(&h * &k)));
                let inv = sup_diff(&(&g * &g.inv()), &e).max(sup_diff(&(&g.inv() * &g), &e)).max(sup_diff(&(&g * &e), &g));
                let hom = sup_diff(&(&g * &h).dilate(t), &(&g.dilate(t) * &h.dilate(t)));
                let metric = (g.dilate(t).gauge_dist(&h.dilate(t)) - t * g.gauge_dist(&h)).abs();
                let mut expected = HPoint::origin(n);
                expected.z = g.omega_bar(&h);
                let comm = sup_diff(&g.commutator(&h).expect("same n"), &expected);
                let proj = sup_diff(&project_along(&w, &(&g * &h)), &project_along(&w, &(&g * &project_along(&w, &h))));
                [assoc, inv, hom, metric, comm, proj]
            })
            .collect();
        for (c, name) in NAMES.iter().enumerate() {
            let max_error = errors.iter().map(|e| e[c]).fold(0.0, f64::max);
            checks.push(CheckResult {
                name: (*name).into(),
                n,
                instances,
                max_error,
                tolerance: ALGEBRA_TOL,
                passed: max_error < ALGEBRA_TOL,
            });
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    AlgebraicReport { checks, passed }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub d: usize,
    pub level: usize,
    pub grids: usize,
    pub failures: usize,
    /// Largest relative defect among the equalities.
    pub worst_equality_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentitySuiteReport {
    pub cases: Vec<IdentitySummary>,
    pub passed: bool,
}

/// Runs the cube identities on `grids` random Gaussian grid functions for
/// every `(d, level)` pair.
pub fn run_identity_suite(dims: &[usize], levels: &[usize], grids: usize, seed: u64) -> Result<IdentitySuiteReport> {
    let mut cases = Vec::new();
    for &d in dims {
        for &level in levels {
            let reports = (0..grids)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng::stream(seed, &[0x1D, d as u64, level as u64, i as u64]);
                    let values = (0..1usize << (d * level)).map(|_| rng.sample(StandardNormal)).collect();
                    verify_identities(&GridFunction::new(d, level, values)?)
                })
                .collect::<Result<Vec<_>>>()?;
            let failures = reports.iter().filter(|r| !r.passed).count();
            let worst_equality_defect = reports
                .iter()
                .flat_map(|r| r.checks.iter())
                .filter(|c| c.lower == c.upper)
                .map(|c| (c.value - c.lower).abs() / c.value.abs().max(c.lower.abs()).max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            cases.push(IdentitySummary { d, level, grids, failures, worst_equality_defect });
        }
    }
    let passed = cases.iter().all(|c| c.failures == 0);
    Ok(IdentitySuiteReport { cases, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(run_algebraic_suite(&[1, 2], 50, 3).passed);
        assert!(run_identity_suite(&[3], &[2], 5, 3).unwrap().passed);
    }
}
