//! Command-line front end.
//!
//! Exit status: 0 on success, 1 when `compare` finds a failing score, 2 when
//! the model file cannot be read or does not validate, 3 when the evaluation
//! itself fails (for instance a truncation that cannot be reached).

use std::fs::File;
use std::io;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analysis::Analyzer;
use crate::error::{Error, Result};
use crate::model::{validate_model, ValidatedModel};
use crate::model_file::load_model_file;
use crate::report::{analytic_rows, write_rows, AnalyticRequest, Format, ReportRow};
use crate::simulator::{compare, simulate, PhaseSemantics, SimOptions};
use crate::transient::Method;

#[derive(Debug, Parser)]
#[command(name = "mmapq", version, about = "Infinite-server queues with marked MAP arrivals and catastrophes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the analytic transforms and performance measures.
    Analyze(Common),
    /// Estimate the same quantities by simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Run both and score the analytic values against the estimates.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 3.0)]
        z_threshold: f64,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model file (TOML).
    #[arg(long)]
    pub model: PathBuf,
    /// Overrides `numeric.horizon`.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Overrides `numeric.step`.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.6,0.9")]
    pub z_points: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1")]
    pub s_points: Vec<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: Format,
    #[arg(long, default_value = "ode")]
    pub method: Method,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "keep")]
    pub phase_reset: PhaseSemantics,
}

fn load(common: &Common) -> Result<ValidatedModel> {
    let mut config = load_model_file(&common.model).map_err(|e| match e {
        Error::Io(io) => Error::Schema { field: "model".into(), message: format!("{}: {io}", common.model.display()) },
        other => other,
    })?;
    for (name, v) in [("horizon", common.horizon), ("step", common.step)] {
        if let Some(x) = v {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Schema { field: name.into(), message: format!("override {x} must be positive") });
            }
        }
    }
    if let Some(h) = common.horizon {
        config.numeric.horizon = h;
    }
    if let Some(s) = common.step {
        config.numeric.step = s;
    }
    validate_model(&config)
}

fn emit(common: &Common, rows: &[ReportRow]) -> Result<()> {
    match &common.output {
        Some(path) => write_rows(rows, common.format, io::BufWriter::new(File::create(path)?)),
        None => write_rows(rows, common.format, io::stdout().lock()),
    }
}

fn sim_options(model: &ValidatedModel, common: &Common, sim: &SimArgs) -> SimOptions {
    let mut opts = SimOptions::new(model.grid().horizon(), sim.reps, sim.seed);
    opts.phase = sim.phase_reset;
    opts.z_points = common.z_points.clone();
    opts.s_points = common.s_points.clone();
    opts
}

fn request(common: &Common, with_pmf: bool) -> AnalyticRequest {
    AnalyticRequest { z_points: common.z_points.clone(), s_points: common.s_points.clone(), with_pmf, ..Default::default() }
}

/// Runs one command and returns the exit status.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Analyze(common) => load(common).and_then(|m| {
            let a = Analyzer::new(&m, common.method)?;
            emit(common, &analytic_rows(&a, &request(common, true))?).map(|_| 0)
        }),
        Command::Simulate { common, sim } => load(common).and_then(|m| {
            let est = simulate(&m, &sim_options(&m, common, sim))?;
            eprintln!(
                "{} replications, {} events, {} conservation violations",
                est.replications, est.events, est.conservation_violations
            );
            emit(common, &est.rows).map(|_| 0)
        }),
        Command::Compare { common, sim, z_threshold } => load(common).and_then(|m| {
            let a = Analyzer::new(&m, common.method)?;
            let analytic = analytic_rows(&a, &request(common, false))?;
            let est = simulate(&m, &sim_options(&m, common, sim))?;
            let report = compare(&est, &analytic, *z_threshold)?;
            emit(common, &report.rows())?;
            for c in report.failures() {
                eprintln!("FAIL {}: analytic {} estimate {} (se {}, z {:.2})", c.key, c.analytic, c.estimate, c.stderr, c.z);
            }
            if est.conservation_violations > 0 {
                eprintln!("FAIL conservation: {} violations", est.conservation_violations);
                return Ok(1);
            }
            Ok(if report.all_pass() { 0 } else { 1 })
        }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                3
            }
        }
    }
}

pub fn main_from_args() -> i32 {
    run(Cli::parse())
}
