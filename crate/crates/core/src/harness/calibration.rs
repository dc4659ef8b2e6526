//! Calibration curves: predicted variance against empirical squared error.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_WINDOW: usize = 200;

/// Sliding-window means after sorting by predicted variance.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCurve<T> {
    /// `(mean predicted variance, mean squared error)` per window.
    pub points: Vec<(T, T)>,
    /// Samples per window.
    pub window: usize,
}

/// Sorts `(predicted_variance, squared_error)` pairs by prediction and
/// averages both coordinates over every run of `window` adjacent pairs.
///
/// A window longer than the input is truncated to the input length, giving a
/// single point at the global means.
pub fn calibration_curve<T: Real>(pairs: &[(T, T)], window: usize) -> Result<CalibrationCurve<T>> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData(
            "calibration needs at least one pair".into(),
        ));
    }
    if window == 0 {
        return Err(Error::domain("window must be >= 1"));
    }
    for &(p, e) in pairs {
        if !(p >= T::zero() && e >= T::zero() && p.is_finite() && e.is_finite()) {
            return Err(Error::domain(format!(
                "pairs must be finite and >= 0, got ({p}, {e})"
            )));
        }
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.partial_cmp(&b.1).unwrap())
    });

    let w = window.min(sorted.len());
    let inv = T::from_count(w).recip();
    let points = sorted
        .windows(w)
        .map(|chunk| {
            let (sp, se) = chunk
                .iter()
                .fold((T::zero(), T::zero()), |(sp, se), &(p, e)| (sp + p, se + e));
            (sp * inv, se * inv)
        })
        .collect();
    Ok(CalibrationCurve { points, window: w })
}
