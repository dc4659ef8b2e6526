//! Experiment plumbing: parameter fitting, rig simulation, calibration curves
//! and the verification suites.

pub mod calibration;
pub mod fit;
pub mod simulate;
pub mod verify;

pub use calibration::{calibration_curve, CalibrationCurve, DEFAULT_WINDOW};
pub use fit::{fit_params, fit_params_from, fit_params_with, initial_guess, mean_loss, FitResult};
pub use simulate::{simulate_rig, ScenarioConfig};
pub use verify::{run_suites, SuiteReport, VerifyConfig, SUITES};
