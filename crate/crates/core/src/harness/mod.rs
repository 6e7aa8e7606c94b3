//! Multiscale experiments on intrinsic graphs and the JSON/CSV reports they
//! produce.
//!
//! Every experiment is driven by a [`RunConfig`]. Random streams are keyed on
//! the config seed and on task indices, and parallel results are reduced in
//! index order, so a config always reproduces the same report bit for bit.

mod calibrate;
mod carleson;
mod suites;
mod theta;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use calibrate::{calibrate_c, CalibrationReport, CalibrationSettings, RadiusCalibration, C_MAX};
pub use carleson::{run_carleson, run_carleson_on, CarlesonReport, ExponentFit, RadiusSummary, ScaleContribution};
pub use suites::{
    run_algebraic_suite, run_identity_suite, AlgebraicReport, CheckResult, IdentitySuiteReport, IdentitySummary, ALGEBRA_TOL,
};
pub use theta::{run_theta_slices, run_theta_slices_on, SliceTheta, ThetaReport};

use crate::error::{invalid, HsError, Result};
use crate::graphs::{check_cone_condition, make_family, Family, GraphFamilySpec, IntrinsicGraph};

/// Flat experiment configuration. Every key is optional in JSON and unknown
/// keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub n: usize,
    pub family: Family,
    pub lambda: f64,
    /// Cone parameter of `w`; the graph module's default when absent.
    pub lambda_prime: Option<f64>,
    /// Grid nodes per axis of the graph function.
    pub resolution: usize,
    /// Largest outer radius `R_max`.
    pub radius_max: f64,
    /// Number `K` of dyadic scales `r_k = R_max · 2^{-k}`.
    pub num_scales: usize,
    pub centers_per_scale: usize,
    /// Proposals drawn for each beta number.
    pub samples_per_beta: usize,
    pub seed: u64,
    /// Quasibox constant from a calibration run, recorded in reports.
    pub empirical_c: Option<f64>,
    pub output_path: Option<PathBuf>,
    /// Where to write the `k,r,contribution` table of a Carleson run.
    pub csv_path: Option<PathBuf>,
    /// Fraction of the largest admissible amplitude used by the family.
    pub amplitude_scale: f64,
    pub half_width: f64,
    pub half_height: f64,
    pub bump_width: f64,
    pub octaves: usize,
    /// Proposals used to place nets and estimate cell measures.
    pub surrogate_samples: usize,
    /// Cosets sampled by the slice experiment.
    pub slices: usize,
    /// Base points per coset in the slice experiment.
    pub theta_points: usize,
    pub cone_trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let spec = GraphFamilySpec::new(Family::SmoothBump, 2, 0.3, 0, 16);
        RunConfig {
            n: 2,
            family: Family::SmoothBump,
            lambda: 0.3,
            lambda_prime: None,
            resolution: 16,
            radius_max: 1.0,
            num_scales: 5,
            centers_per_scale: 40,
            samples_per_beta: 2000,
            seed: 0,
            empirical_c: None,
            output_path: None,
            csv_path: None,
            amplitude_scale: spec.scale,
            half_width: spec.half_width,
            half_height: spec.half_height,
            bump_width: spec.bump_width,
            octaves: spec.octaves,
            surrogate_samples: 20_000,
            slices: 10,
            theta_points: 48,
            cone_trials: 10_000,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("n must be at least 1");
        }
        if self.num_scales < 3 {
            return invalid("at least 3 scales are needed");
        }
        if !(self.radius_max > 0.0 && self.radius_max.is_finite()) {
            return invalid("radius_max must be positive");
        }
        if self.centers_per_scale == 0 || self.samples_per_beta == 0 || self.surrogate_samples == 0 {
            return invalid("counts must be positive");
        }
        if let Some(c) = self.empirical_c {
            if !(c >= 1.0 && c.is_finite()) {
                return invalid("empirical_c must be at least 1");
            }
        }
        Ok(())
    }

    pub fn family_spec(&self) -> GraphFamilySpec {
        let mut spec = GraphFamilySpec::new(self.family, self.n, self.lambda, self.seed, self.resolution);
        spec.lambda_prime = self.lambda_prime;
        spec.scale = self.amplitude_scale;
        spec.half_width = self.half_width;
        spec.half_height = self.half_height;
        spec.bump_width = self.bump_width;
        spec.octaves = self.octaves;
        spec
    }

    /// Scales `r_k = R_max · 2^{-k}` for `k < K`.
    pub fn scales(&self) -> Vec<f64> {
        (0..self.num_scales).map(|k| self.radius_max * 0.5f64.powi(k as i32)).collect()
    }
}

/// Builds the configured family and certifies it with an independent cone
/// check.
pub fn build_graph(cfg: &RunConfig) -> Result<IntrinsicGraph> {
    cfg.validate()?;
    let g = make_family(&cfg.family_spec())?;
    let report = check_cone_condition(&g, cfg.cone_trials, crate::rng::derive_key(cfg.seed, &[0xC0DE]))?;
    if !report.passed {
        return Err(HsError::Violation(format!("cone check failed with ratio {}", report.worst_ratio)));
    }
    Ok(g)
}

/// Serializes a report, writing it to `path` when one is given.
pub fn emit_json<T: Serialize>(report: &T, path: Option<&Path>) -> Result<String> {
    let text = serde_json::to_string_pretty(report)?;
    if let Some(p) = path {
        std::fs::write(p, &text)?;
    }
    Ok(text)
}

/// Least-squares slope of `ln y` against `ln x`, with its standard error
/// when there are more points than parameters.
pub(crate) fn loglog_slope(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() < 2 || y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let se = if lx.len() > 2 {
        let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some((slope, se))
}
