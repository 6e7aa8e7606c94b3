use std::process::Command;

use hslice::graphs::Family;
use hslice::harness::{build_graph, calibrate_c, emit_json, run_carleson, run_theta_slices, CalibrationSettings, RunConfig};

fn small() -> RunConfig {
    RunConfig { num_scales: 3, centers_per_scale: 12, samples_per_beta: 600, surrogate_samples: 6000, ..Default::default() }
}

#[test]
fn identical_configs_give_bitwise_identical_reports() {
    let cfg = small();
    let a = emit_json(&run_carleson(&cfg).unwrap(), None).unwrap();
    let b = emit_json(&run_carleson(&cfg).unwrap(), None).unwrap();
    assert_eq!(a, b);
    let theta = RunConfig { slices: 3, theta_points: 16, ..small() };
    let a = emit_json(&run_theta_slices(&theta).unwrap(), None).unwrap();
    let b = emit_json(&run_theta_slices(&theta).unwrap(), None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn planes_carry_no_carleson_mass_and_no_theta() {
    let cfg = RunConfig { family: Family::VerticalPlane, ..small() };
    let rep = run_carleson(&cfg).unwrap();
    for r in &rep.radii {
        assert!(r.integral <= 3.0 * r.stderr + 1e-12, "{r:?}");
    }
    let theta = run_theta_slices(&RunConfig { slices: 3, theta_points: 16, ..cfg }).unwrap();
    for s in &theta.per_slice {
        assert!(s.integral.abs() < 1e-12, "{s:?}");
    }
}

#[test]
fn doubling_the_sample_count_is_statistically_consistent() {
    // Below about 1000 proposals some balls hold too few samples and drop
    // out, which biases the sum low.
    let cfg = RunConfig { samples_per_beta: 1200, ..small() };
    let a = run_carleson(&cfg).unwrap();
    let b = run_carleson(&RunConfig { samples_per_beta: 2 * cfg.samples_per_beta, ..cfg }).unwrap();
    let (ra, rb) = (a.radii.last().unwrap(), b.radii.last().unwrap());
    let se = (ra.stderr.powi(2) + rb.stderr.powi(2)).sqrt();
    assert!((ra.integral - rb.integral).abs() <= 3.0 * se, "{} vs {} (se {se})", ra.integral, rb.integral);
}

#[test]
fn calibration_is_dilation_invariant_and_grows_with_the_cone() {
    let base = RunConfig { half_width: 10.0, half_height: 30.0, bump_width: 2.0, ..Default::default() };
    let settings = CalibrationSettings { centers: 4, ball_samples: 10_000, ..Default::default() };
    let mut cs = Vec::new();
    for lambda in [0.2, 0.4, 0.6] {
        let g = build_graph(&RunConfig { lambda, ..base.clone() }).unwrap();
        cs.push(calibrate_c(&g, &settings).unwrap().c);
    }
    assert!(cs[0] <= cs[1] && cs[1] <= cs[2], "{cs:?}");

    let g = build_graph(&RunConfig { lambda: 0.4, ..base }).unwrap();
    let dilated = g.dilate(2.0).unwrap();
    let scaled = CalibrationSettings { radii: settings.radii.iter().map(|r| 2.0 * r).collect(), ..settings.clone() };
    let (c1, c2) = (calibrate_c(&g, &settings).unwrap().c, calibrate_c(&dilated, &scaled).unwrap().c);
    assert!((c1 - c2).abs() <= 0.05 * c1, "{c1} vs {c2}");
}

fn hslice() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hslice"))
}

#[test]
fn cli_flags_override_the_config_file() {
    let dir = std::env::temp_dir().join(format!("hslice-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, r#"{"family": "vertical-plane", "num_scales": 3, "centers_per_scale": 6, "samples_per_beta": 300, "surrogate_samples": 3000, "seed": 4}"#).unwrap();
    let out = dir.join("report.json");
    let csv = dir.join("table.csv");
    let status = hslice()
        .args(["carleson", "--config"])
        .arg(&cfg)
        .args(["--seed", "9", "--output"])
        .arg(&out)
        .arg("--csv")
        .arg(&csv)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["config"]["num_scales"], 3);
    assert_eq!(report["config"]["family"], "vertical-plane");
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("k,r,contribution"));
    assert_eq!(table.lines().count(), 4);

    std::fs::write(&cfg, r#"{"no_such_key": 1}"#).unwrap();
    let bad = hslice().args(["carleson", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn cli_selftest_reports_success() {
    let out = hslice().args(["selftest", "--ns", "1,2", "--instances", "50"]).output().unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
}
