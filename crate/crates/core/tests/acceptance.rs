//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Runtime limits are part of each criterion.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hslice::beta::{
    beta_number, best_affine_fit_with, dist_to_vertical_plane, switch_affine, verify_switch, FnField, PlaneAffine,
    QuasiBox, Quadrature, VerticalPlane,
};
use hslice::graphs::{make_family, slice_lipschitz_bound, vertical_plane_graph, Family, GraphFamilySpec};
use hslice::grid::BoxDomain;
use hslice::harness::{
    build_graph, calibrate_c, run_algebraic_suite, run_carleson, run_identity_suite, run_theta_slices,
    CalibrationSettings, RunConfig,
};
use hslice::heisenberg::{plane_p_w, HPoint, HorizontalDirection};

type Outcome = Result<(bool, String), String>;

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { name: "algebraic suite", limit: Duration::from_secs(5), run: algebraic },
        Criterion { name: "wavelet identities", limit: Duration::from_secs(60), run: identities },
        Criterion { name: "switch affine", limit: Duration::from_secs(10), run: switch },
        Criterion { name: "slice lipschitz", limit: Duration::from_secs(30), run: slice_lipschitz },
        Criterion { name: "quasibox calibration", limit: Duration::from_secs(60), run: calibration },
        Criterion { name: "beta sanity", limit: Duration::from_secs(30), run: beta_sanity },
        Criterion { name: "carleson scaling", limit: Duration::from_secs(15 * 60), run: carleson },
        Criterion { name: "theta slices", limit: Duration::from_secs(5 * 60), run: theta },
        Criterion { name: "oracle cross-checks", limit: Duration::from_secs(30), run: oracles },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.limit;
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "{} {}: {} [{:.1} s, limit {} s{}]",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn algebraic() -> Outcome {
    let report = run_algebraic_suite(&[1, 2, 3], 1000, 0);
    let worst = report.checks.iter().map(|c| c.max_error).fold(0.0, f64::max);
    Ok((report.passed, format!("{} checks, max error {worst:.2e} (tol 1e-10)", report.checks.len())))
}

fn identities() -> Outcome {
    let report = run_identity_suite(&[3, 4, 5], &[2, 3], 200, 0).map_err(err)?;
    let failures: usize = report.cases.iter().map(|c| c.failures).sum();
    let worst = report.cases.iter().map(|c| c.worst_equality_defect).fold(0.0, f64::max);
    Ok((report.passed, format!("{} cases, {failures} failing grids, worst relative defect {worst:.2e}", report.cases.len())))
}

/// Random `(T, w, w′)` in `H_2` with `[w, w′] = 0` and `‖w − w′‖·Lip(T) < 1/2`.
fn random_switch_triple(rng: &mut ChaCha8Rng) -> hslice::Result<(PlaneAffine, HorizontalDirection, HorizontalDirection)> {
    let mut wh: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    wh[3] = 1.0;
    let w = HorizontalDirection::from_horizontal(&wh)?;
    let basis = plane_p_w(&w).horizontal_basis();
    let combo = |coeffs: &[f64]| {
        let mut v = vec![0.0; 4];
        for (c, b) in coeffs.iter().zip(&basis) {
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += c * bi;
            }
        }
        v
    };
    let lip: f64 = rng.random_range(0.05..2.0);
    let dir: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let grad = combo(&dir);
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let grad: Vec<f64> = grad.iter().map(|g| g * lip / norm).collect();
    let t = PlaneAffine::new(w.clone(), grad, rng.random_range(-1.0..1.0))?;

    let sdir = combo(&(0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
    let snorm = sdir.iter().map(|g| g * g).sum::<f64>().sqrt();
    let len = rng.random_range(0.0..0.99) / (2.0 * lip);
    let wp: Vec<f64> = wh.iter().zip(&sdir).map(|(a, s)| a + s * len / snorm).collect();
    Ok((t, w, HorizontalDirection::from_horizontal(&wp)?))
}

fn switch() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut gap, mut gauge_gap, mut ratio) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..100 {
        let (t, w, wp) = random_switch_triple(&mut rng).map_err(err)?;
        let tp = switch_affine(&t, &w, &wp).map_err(err)?;
        let check = verify_switch(&t, &tp, &wp, 1000, 2.0, i).map_err(err)?;
        gap = gap.max(check.max_gap);
        gauge_gap = gauge_gap.max(check.max_gauge_gap);
        ratio = ratio.max(check.lip_ratio);
    }
    let ok = gap < 1e-9 && ratio < 2.0;
    Ok((ok, format!("100 triples, max coordinate gap {gap:.2e} (gauge {gauge_gap:.2e}), max Lip ratio {ratio:.3}")))
}

fn slice_lipschitz() -> Outcome {
    let mut worst_ratio = 0.0f64;
    let mut bound = 0.0;
    for seed in 0..10 {
        let g = make_family(&GraphFamilySpec::new(Family::RandomLipschitz, 2, 0.3, seed, 16)).map_err(err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for k in 0..4 {
            let base: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = HPoint::from_v0_coords(&base);
            let rep = slice_lipschitz_bound(&g, &p, 2000, seed * 10 + k).map_err(err)?;
            worst_ratio = worst_ratio.max(rep.max_quotient / rep.bound);
            bound = rep.bound;
        }
    }
    Ok((worst_ratio <= 2.0, format!("10 graphs x 4 slices, max quotient / bound {worst_ratio:.3} (bound {bound:.4}, slack 2)")))
}

fn calibration() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for family in [Family::VerticalPlane, Family::SmoothBump, Family::RandomLipschitz] {
        for lambda in [0.2, 0.4, 0.6] {
            let cfg = RunConfig { family, lambda, half_width: 10.0, half_height: 30.0, bump_width: 2.0, ..Default::default() };
            let g = build_graph(&cfg).map_err(err)?;
            let rep = calibrate_c(&g, &CalibrationSettings::default()).map_err(err)?;
            ok &= rep.c <= 64.0 && rep.spread <= 1.1;
            parts.push(format!("{family:?}@{lambda}: c={:.2} spread={:.3}", rep.c, rep.spread));
        }
    }
    Ok((ok, parts.join("; ")))
}

fn beta_sanity() -> Outcome {
    let dom = BoxDomain::centered(&[3.0, 3.0, 3.0, 6.0]).map_err(err)?;
    let mut plane_ok = true;
    let mut worst_plane = 0.0f64;
    for (i, slope) in [[0.0, 0.0, 0.0], [0.1, -0.2, 0.15], [-0.2, 0.1, 0.05]].iter().enumerate() {
        let g = vertical_plane_graph(2, slope, 0.3, dom.clone(), 16, 0.3, 0.72).map_err(err)?;
        let x = g.graph_point_coords(&[0.1, 0.2, -0.1, 0.3]).ok_or("base point off the domain")?;
        for r in [0.5, 1.0] {
            let b = beta_number(&g, &x, r, 2000, i as u64).map_err(err)?;
            // A flat sample has zero spread, so allow for round-off in the fit.
            plane_ok &= b.value <= 3.0 * b.stderr + 1e-12;
            worst_plane = worst_plane.max(b.value);
        }
    }
    let mut scale_ok = true;
    let mut worst_z = 0.0f64;
    let g = make_family(&GraphFamilySpec::new(Family::SmoothBump, 2, 0.3, 3, 16)).map_err(err)?;
    let g2 = g.dilate(2.0).map_err(err)?;
    for (k, base) in [[0.2, -0.1, 0.3, 0.1], [-0.4, 0.3, 0.0, -0.5], [0.0, 0.5, -0.3, 0.4]].iter().enumerate() {
        let x = g.graph_point_coords(base).ok_or("base point off the domain")?;
        let b1 = beta_number(&g, &x, 0.8, 4000, 10 + k as u64).map_err(err)?;
        let b2 = beta_number(&g2, &x.dilate(2.0), 1.6, 4000, 20 + k as u64).map_err(err)?;
        let se = (b1.stderr.powi(2) + b2.stderr.powi(2)).sqrt();
        let z = (b1.value - b2.value).abs() / se;
        scale_ok &= z <= 2.0;
        worst_z = worst_z.max(z);
    }
    Ok((
        plane_ok && scale_ok,
        format!("planes: max beta {worst_plane:.2e} within 3 se: {plane_ok}; dilation: worst |diff| = {worst_z:.2} combined se"),
    ))
}

fn carleson() -> Outcome {
    let bump = RunConfig {
        family: Family::SmoothBump,
        radius_max: 2.0,
        bump_width: 0.5,
        half_width: 4.0,
        half_height: 8.0,
        ..Default::default()
    };
    let lip = RunConfig { family: Family::RandomLipschitz, radius_max: 2.0, ..Default::default() };
    let mut ok = true;
    let mut parts = Vec::new();
    for cfg in [bump, lip] {
        let rep = run_carleson(&cfg).map_err(err)?;
        let slope = rep.exponent_fit.as_ref().map_or(f64::NAN, |f| f.slope);
        ok &= rep.ratio_spread < 2.0 && slope <= 5.5;
        parts.push(format!("{:?}: envelope spread {:.3}, exponent {slope:.2}", cfg.family, rep.ratio_spread));
    }
    Ok((ok, parts.join("; ")))
}

fn theta() -> Outcome {
    let coarse = run_theta_slices(&RunConfig { num_scales: 5, ..Default::default() }).map_err(err)?;
    let fine = run_theta_slices(&RunConfig { num_scales: 10, ..Default::default() }).map_err(err)?;
    let (a, b) = (coarse.max_ratio, fine.max_ratio);
    let change = (a - b).abs() / a.min(b);
    Ok((
        a.is_finite() && b.is_finite() && change <= 0.3,
        format!("{} slices, max ratio {a:.4e} (K=5) vs {b:.4e} (K=10), change {:.1}%", coarse.per_slice.len(), 100.0 * change),
    ))
}

/// Solves the weighted normal equations by Gaussian elimination with partial
/// pivoting.
fn normal_equations(rows: &[Vec<f64>], values: &[f64]) -> Vec<f64> {
    let k = rows[0].len();
    let mut m = vec![vec![0.0; k + 1]; k];
    for (r, y) in rows.iter().zip(values) {
        for i in 0..k {
            for j in 0..k {
                m[i][j] += r[i] * r[j];
            }
            m[i][k] += r[i] * y;
        }
    }
    for col in 0..k {
        let pivot = (col..k).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, pivot);
        let (top, rest) = m.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for row in rest.iter_mut().take(k - col - 1) {
            let f = row[col] / pivot_row[col];
            for (a, b) in row[col..=k].iter_mut().zip(&pivot_row[col..=k]) {
                *a -= f * b;
            }
        }
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][k] - s) / m[i][i];
    }
    x
}

/// Minimizes the gauge distance from `p` to points of the plane by compass
/// search from several starts.
fn brute_force_distance(p: &HPoint, normal: &[f64], offset: f64, rng: &mut ChaCha8Rng) -> f64 {
    let d = normal.len();
    // Orthonormal complement of the normal by Gram-Schmidt on the axes.
    let mut tangents: Vec<Vec<f64>> = Vec::new();
    for a in 0..d {
        let mut v = vec![0.0; d];
        v[a] = 1.0;
        for u in std::iter::once(normal.to_vec()).chain(tangents.clone()) {
            let c: f64 = v.iter().zip(&u).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(&u).for_each(|(x, y)| *x -= c * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 && tangents.len() < d - 1 {
            tangents.push(v.iter().map(|x| x / n).collect());
        }
    }
    let point = |params: &[f64]| {
        let mut h: Vec<f64> = normal.iter().map(|v| v * offset).collect();
        for (c, t) in params[..d - 1].iter().zip(&tangents) {
            h.iter_mut().zip(t).for_each(|(x, y)| *x += c * y);
        }
        HPoint::from_horizontal(&h, params[d - 1])
    };
    let cost = |params: &[f64]| p.gauge_dist(&point(params));
    let scale = 1.0 + p.gauge_norm();
    let mut best = f64::INFINITY;
    for _ in 0..8 {
        let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..scale)).collect();
        let mut fx = cost(&x);
        let mut step = scale;
        while step > 1e-10 * scale {
            let mut improved = false;
            for i in 0..d {
                for sign in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] += sign * step;
                    let fy = cost(&y);
                    if fy < fx {
                        x = y;
                        fx = fy;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.min(fx);
    }
    best
}

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_coef = 0.0f64;
    let mut worst_resid = 0.0f64;
    for i in 0..50 {
        let n = 2 + i % 2;
        let dim = 2 * n;
        let q_coef: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lin: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let field = FnField {
            dim,
            f: move |v: &[f64]| {
                v.iter().zip(&lin).map(|(a, b)| a * b).sum::<f64>()
                    + v.iter().zip(&q_coef).map(|(a, b)| b * (a * a)).sum::<f64>()
                    + (v[0] * v[dim - 1]).sin()
            },
        };
        let mut wh: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.8..0.8)).collect();
        wh[dim - 1] = 1.0;
        let w = HorizontalDirection::from_horizontal(&wh).map_err(err)?;
        let mut c: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        c[dim - 1] = 0.0;
        let center = HPoint::from_horizontal(&c, rng.random_range(-1.0..1.0));
        let q = QuasiBox::new(w, center, rng.random_range(0.3..2.0)).map_err(err)?;
        let per_axis = 6;
        let fit = best_affine_fit_with(&field, &q, Quadrature::Lattice { per_axis }).map_err(err)?;

        let lattice = q.lattice(per_axis, None).map_err(err)?;
        // Work in coordinates (v − centre)/radius so the normal equations stay
        // well conditioned, then map the coefficients back.
        let origin = q.center().v0_coords();
        let radius = q.radius();
        let rows: Vec<Vec<f64>> = lattice
            .points
            .iter()
            .map(|p| (0..dim - 1).map(|j| (p[j] - origin[j]) / radius).chain(std::iter::once(1.0)).collect())
            .collect();
        let values: Vec<f64> = lattice.points.iter().map(|p| (field.f)(p)).collect();
        let local = normal_equations(&rows, &values);
        let mut coef: Vec<f64> = local[..dim - 1].iter().map(|a| a / radius).collect();
        coef.push(local[dim - 1] - (0..dim - 1).map(|j| coef[j] * origin[j]).sum::<f64>());
        let resid: f64 = rows
            .iter()
            .zip(&values)
            .map(|(r, y)| (r.iter().zip(&local).map(|(a, b)| a * b).sum::<f64>() - y).powi(2))
            .sum::<f64>();
        let resid = (resid * lattice.weight).sqrt();
        for (a, b) in coef.iter().zip(&fit.function.coefficients) {
            worst_coef = worst_coef.max((a - b).abs() / (1.0 + a.abs()));
        }
        worst_resid = worst_resid.max((resid - fit.residual).abs() / (1.0 + resid));
    }

    let mut worst_dist = 0.0f64;
    for i in 0..50 {
        let n = 1 + i % 2;
        let d = 2 * n;
        let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let normal: Vec<f64> = raw.iter().map(|x| x / norm).collect();
        let offset = rng.random_range(-1.5..1.5);
        let plane = VerticalPlane::new(normal.clone(), offset).map_err(err)?;
        let h: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let p = HPoint::from_horizontal(&h, rng.random_range(-2.0..2.0));
        let fast = dist_to_vertical_plane(&p, &plane);
        let slow = brute_force_distance(&p, &normal, offset, &mut rng);
        worst_dist = worst_dist.max((fast - slow).abs() / slow.max(1e-12));
    }
    let ok = worst_coef < 1e-9 && worst_resid < 1e-9 && worst_dist < 1e-3;
    Ok((
        ok,
        format!("affine fit: coef {worst_coef:.2e}, residual {worst_resid:.2e}; plane distance: relative {worst_dist:.2e}"),
    ))
}
