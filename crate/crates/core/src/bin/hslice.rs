use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hslice::graphs::Family;
use hslice::harness::{
    self, calibrate_c, emit_json, run_algebraic_suite, run_carleson, run_identity_suite, run_theta_slices,
    CalibrationReport, CalibrationSettings, RunConfig,
};

#[derive(Parser)]
#[command(name = "hslice", version, about = "Multiscale experiments on intrinsic Lipschitz graphs in the Heisenberg group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Carleson integral of beta squared over three nested balls.
    Carleson {
        #[command(flatten)]
        common: Common,
        /// Also write the `k,r,contribution` table to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Affine-approximation integrals on sampled cosets of P_w.
    Theta {
        #[command(flatten)]
        common: Common,
    },
    /// Empirical quasibox constant c at several radii.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Radii to calibrate at, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 1.0, 4.0])]
        radii: Vec<f64>,
        /// Graph points sampled per radius.
        #[arg(long, default_value_t = 6)]
        calibration_centers: usize,
    },
    /// Haar cube identities on random grid functions.
    Identities {
        #[arg(long, value_delimiter = ',', default_values_t = [3, 4, 5])]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [2, 3])]
        levels: Vec<usize>,
        /// Random grid functions per (d, level).
        #[arg(long, default_value_t = 200)]
        grids: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Group-law and projection identities on random points.
    Selftest {
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3])]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Flags shared by the graph experiments. They override the config file,
/// which overrides the built-in defaults.
#[derive(Args)]
struct Common {
    /// JSON file with any subset of the run configuration keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// vertical-plane, smooth-bump or random-lipschitz.
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    radius_max: Option<f64>,
    /// Number of dyadic scales.
    #[arg(long)]
    scales: Option<usize>,
    /// Net points per scale.
    #[arg(long)]
    centers: Option<usize>,
    /// Proposals per beta number or theta ball.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> hslice::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.family {
            cfg.family = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.radius_max {
            cfg.radius_max = v;
        }
        if let Some(v) = self.scales {
            cfg.num_scales = v;
        }
        if let Some(v) = self.centers {
            cfg.centers_per_scale = v;
        }
        if let Some(v) = self.samples {
            cfg.samples_per_beta = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.output {
            cfg.output_path = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct CalibrationOutput {
    config: RunConfig,
    settings: CalibrationSettings,
    report: CalibrationReport,
}

fn print_or_write<T: Serialize>(report: &T, path: Option<&std::path::Path>) -> hslice::Result<()> {
    let text = emit_json(report, path)?;
    if path.is_none() {
        println!("{text}");
    }
    Ok(())
}

fn run(cli: Cli) -> hslice::Result<bool> {
    match cli.command {
        Command::Carleson { common, csv } => {
            let mut cfg = common.config()?;
            if csv.is_some() {
                cfg.csv_path = csv;
            }
            let report = run_carleson(&cfg)?;
            if let Some(path) = &cfg.csv_path {
                report.write_csv(path)?;
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print_or_write(&report, cfg.output_path.as_deref())?;
            Ok(true)
        }
        Command::Theta { common } => {
            let cfg = common.config()?;
            let report = run_theta_slices(&cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print_or_write(&report, cfg.output_path.as_deref())?;
            Ok(true)
        }
        Command::Calibrate { common, radii, calibration_centers } => {
            let cfg = common.config()?;
            let g = harness::build_graph(&cfg)?;
            let settings = CalibrationSettings { radii, centers: calibration_centers, seed: cfg.seed, ..Default::default() };
            let report = calibrate_c(&g, &settings)?;
            let out = CalibrationOutput { config: cfg.clone(), settings, report };
            print_or_write(&out, cfg.output_path.as_deref())?;
            Ok(true)
        }
        Command::Identities { dims, levels, grids, seed, output } => {
            let report = run_identity_suite(&dims, &levels, grids, seed)?;
            print_or_write(&report, output.as_deref())?;
            Ok(report.passed)
        }
        Command::Selftest { ns, instances, seed, output } => {
            let report = run_algebraic_suite(&ns, instances, seed);
            print_or_write(&report, output.as_deref())?;
            Ok(report.passed)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
