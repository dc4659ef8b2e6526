//! `projhuber`: JSON front end to the projhuber library.
//!
//! Every subcommand reads JSON from `--input` (or standard input), writes one
//! JSON document to `--output` (or standard output) and exits with 0 on
//! success, 1 when the input is well-formed but outside the domain of the
//! operation, and 2 when the input cannot be parsed.

mod json;

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use projhuber::fusion::{fuse_with, plane_mle_with};
use projhuber::harness::{
    calibration_curve, fit_params_with, initial_guess, run_suites, simulate_rig, ScenarioConfig,
    VerifyConfig, DEFAULT_WINDOW,
};
use projhuber::solver::SolverOptions;
use projhuber::{compute_stats, stats_from_ranges, Error, Point3, ProjectedHuber, RawOutput};
use serde::de::DeserializeOwned;
use serde::Serialize;

use json::*;

#[derive(Parser)]
#[command(
    name = "projhuber",
    version,
    about = "Projected Huber distribution tools"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Input JSON file; standard input when omitted.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Random seed; 0 when omitted, `simulate` falls back to the scenario's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sample count (`sample`), or Monte Carlo size (`verify`).
    #[arg(long, global = true, allow_negative_numbers = true)]
    n: Option<i64>,
    /// Gradient-norm tolerance of the solver (`fuse`, `plane`, `fit`).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Sliding-window length (`calibrate`).
    #[arg(long, global = true)]
    window: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Log-density of points: {"params": DistParams, "points": [[x,y,z],...]}.
    Eval,
    /// Draws `--n` points from DistParams.
    Sample,
    /// Projected and depth moments of DistParams.
    Moments,
    /// Dataset constants from `--z-range`/`--f-range` or {"samples": [[z,f],...]}.
    Stats {
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
        z_range: Option<Vec<f64>>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
        f_range: Option<Vec<f64>>,
    },
    /// Multi-view fusion: {"views": [ViewEstimate,...], "init": [x,y,z]?}.
    Fuse,
    /// Fusion on a plane: {"views": [...], "plane": {"d": [..], "c": ..}}.
    Plane,
    /// Direct fit of the raw output: {"samples": [{"v_p","z_p"},...], "init": {"w"}?}.
    Fit,
    /// Synthetic rig from a scenario file (all fields optional).
    Simulate,
    /// Calibration curve: {"pairs": [[predicted_variance, squared_error],...]}.
    Calibrate,
    /// Runs the verification suites (all when none are named).
    Verify { suites: Vec<String> },
}

enum Failure {
    Domain(String),
    Malformed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

type Outcome = Result<String, Failure>;

fn read_input(common: &Common) -> Result<String, Failure> {
    let mut text = String::new();
    match &common.input {
        Some(path) => {
            text = fs::read_to_string(path)
                .map_err(|e| Failure::Malformed(format!("cannot read {}: {e}", path.display())))?;
        }
        None => {
            io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| Failure::Malformed(format!("cannot read standard input: {e}")))?;
        }
    }
    Ok(text)
}

fn parse<T: DeserializeOwned>(common: &Common) -> Result<T, Failure> {
    let text = read_input(common)?;
    serde_json::from_str(&text).map_err(|e| Failure::Malformed(format!("invalid input JSON: {e}")))
}

fn solver_options(common: &Common) -> Result<SolverOptions<f64>, Failure> {
    let mut opts = SolverOptions::default();
    if let Some(tol) = common.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Failure::Domain(format!(
                "--tol must be positive, got {tol}"
            )));
        }
        opts.grad_tol = tol;
    }
    Ok(opts)
}

fn count(common: &Common, default: usize) -> Result<usize, Failure> {
    match common.n {
        None => Ok(default),
        Some(n) if n < 0 => Err(Failure::Domain(format!("--n must be >= 0, got {n}"))),
        Some(n) => Ok(n as usize),
    }
}

fn emit<T: Serialize>(value: &T) -> Outcome {
    Ok(to_string(value))
}

fn fusion_output(r: &projhuber::FusionResult<f64>) -> FusionOutput {
    FusionOutput {
        point: r.point.to_array(),
        nll: r.nll,
        iterations: r.iterations,
        converged: r.converged,
    }
}

fn views(list: &[ViewJson]) -> Result<Vec<projhuber::ViewEstimate<f64>>, Failure> {
    if list.is_empty() {
        return Err(Failure::Domain("at least one view is required".into()));
    }
    Ok(list
        .iter()
        .map(ViewJson::to_view)
        .collect::<Result<_, _>>()?)
}

/// The JSON document and whether the command fully succeeded.
fn run(cli: &Cli) -> Result<(String, bool), Failure> {
    let c = &cli.common;
    let text = match &cli.command {
        Command::Eval => {
            let input: EvalInput = parse(c)?;
            let dist = ProjectedHuber::new(input.params.to_params()?)?;
            let log_pdf = input
                .points
                .iter()
                .map(|&p| dist.log_pdf(Point3::from_array(p)))
                .collect::<Result<_, _>>()?;
            emit(&EvalOutput { log_pdf })
        }
        Command::Sample => {
            let n = count(c, 1000)?;
            let params: DistParamsJson = parse(c)?;
            let dist = ProjectedHuber::new(params.to_params()?)?;
            let points = dist
                .sample(n, c.seed.unwrap_or(0))
                .into_iter()
                .map(Point3::to_array)
                .collect();
            emit(&PointsOutput { points })
        }
        Command::Moments => {
            let params: DistParamsJson = parse(c)?;
            let dist = ProjectedHuber::new(params.to_params()?)?;
            emit(&MomentsOutput::from(&dist.moments()))
        }
        Command::Stats { z_range, f_range } => {
            let stats = match (z_range, f_range) {
                (Some(z), Some(f)) => stats_from_ranges((z[0], z[1]), (f[0], f[1]))?,
                (None, None) => {
                    let input: StatsInput = parse(c)?;
                    let pairs: Vec<(f64, f64)> =
                        input.samples.iter().map(|s| (s[0], s[1])).collect();
                    compute_stats(&pairs)?
                }
                _ => {
                    return Err(Failure::Malformed(
                        "--z-range and --f-range must be given together".into(),
                    ))
                }
            };
            emit(&StatsJson::from(&stats))
        }
        Command::Fuse => {
            let input: FuseInput = parse(c)?;
            let views = views(&input.views)?;
            let init = input.init.map(Point3::from_array);
            emit(&fusion_output(&fuse_with(
                &views,
                init,
                &solver_options(c)?,
            )?))
        }
        Command::Plane => {
            let input: PlaneInput = parse(c)?;
            let views = views(&input.views)?;
            let plane = input.plane.to_plane()?;
            emit(&fusion_output(&plane_mle_with(
                &views,
                &plane,
                &solver_options(c)?,
            )?))
        }
        Command::Fit => {
            let input: FitInput = parse(c)?;
            let samples = input
                .samples
                .iter()
                .map(ObservationJson::to_observation)
                .collect::<Result<Vec<_>, _>>()?;
            let init = match &input.init {
                Some(raw) => RawOutput::new(raw.w)?,
                None => initial_guess(&samples),
            };
            emit(&FitOutput::from(&fit_params_with(
                &samples,
                &init,
                &solver_options(c)?,
            )?))
        }
        Command::Simulate => {
            let text = match &c.input {
                Some(_) => read_input(c)?,
                None => "{}".to_string(),
            };
            let scenario: ScenarioJson = serde_json::from_str(&text)
                .map_err(|e| Failure::Malformed(format!("invalid scenario JSON: {e}")))?;
            let mut config = ScenarioConfig::from(&scenario);
            if let Some(seed) = c.seed {
                config.seed = seed;
            }
            let rig = simulate_rig(&config)?;
            emit(&SimulateOutput {
                truth: config.truth.to_array(),
                views: rig.iter().map(ViewJson::from).collect(),
            })
        }
        Command::Calibrate => {
            let input: CalibrateInput = parse(c)?;
            let pairs: Vec<(f64, f64)> = input.pairs.iter().map(|p| (p[0], p[1])).collect();
            let curve = calibration_curve(&pairs, c.window.unwrap_or(DEFAULT_WINDOW))?;
            emit(&CalibrateOutput {
                window: curve.window,
                points: curve.points.iter().map(|&(p, e)| [p, e]).collect(),
            })
        }
        Command::Verify { suites } => {
            let defaults = VerifyConfig::default();
            let cfg = VerifyConfig {
                seed: c.seed.unwrap_or(0),
                samples: count(c, defaults.samples)?,
                ..defaults
            };
            let reports = run_suites(suites, &cfg).map_err(Failure::Malformed)?;
            let all_passed = reports.iter().all(|r| r.passed);
            let json: Vec<ReportJson> = reports.iter().map(ReportJson::from).collect();
            return Ok((emit(&json)?, all_passed));
        }
    }?;
    Ok((text, true))
}

fn write_output(common: &Common, text: &str) -> io::Result<()> {
    match &common.output {
        Some(path) => fs::write(path, format!("{text}\n")),
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{text}")?;
            out.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((text, passed)) => {
            if let Err(e) = write_output(&cli.common, &text) {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(1);
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: verification failed");
                ExitCode::from(1)
            }
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Malformed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
