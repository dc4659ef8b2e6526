//! Direct maximum-likelihood fit of the raw output to observations.

use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::mapping::{
    activate, loss_unchecked, NormalizedObservation, NormalizedParams, ParamGrad, RawOutput,
};
use crate::scalar::Real;
use crate::solver::{minimize, SolverOptions};
use crate::special;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult<T> {
    pub raw: RawOutput<T>,
    pub params: NormalizedParams<T>,
    /// Mean loss at the optimum.
    pub loss: T,
    pub iterations: usize,
    pub converged: bool,
    /// The optimum sits on `w1 = 0` (`a = 1`) with the data asking for less.
    pub at_boundary: bool,
}

/// Mean of `loss_from_raw` over `samples` and its gradient.
pub fn mean_loss<T: Real>(raw: &RawOutput<T>, samples: &[NormalizedObservation<T>]) -> (T, [T; 7]) {
    let act = activate(raw);
    let np = &act.params;
    let depth_norm = special::log_norm_depth(np.a).unwrap_or((T::infinity(), T::zero()));
    let mut total = T::zero();
    let mut g = ParamGrad {
        nu_p: Vec2::zero(),
        nu_z: T::zero(),
        b: crate::linalg::Mat2::scaled_identity(T::zero()),
        a: T::zero(),
    };
    for obs in samples {
        let (value, gi) = loss_unchecked(np, depth_norm, obs);
        total = total + value;
        g.nu_p = g.nu_p + gi.nu_p;
        g.nu_z = g.nu_z + gi.nu_z;
        g.b = g.b + gi.b;
        g.a = g.a + gi.a;
    }
    let inv_n = T::from_count(samples.len()).recip();
    g.nu_p = g.nu_p.scale(inv_n);
    g.nu_z = g.nu_z * inv_n;
    g.b = g.b.scale(inv_n);
    g.a = g.a * inv_n;
    (total * inv_n, act.pull_back(&g))
}

/// A starting point read off the data: `B = 2I`, `a = 1`, `ν_z` at the
/// geometric mean of `z_p` and `ν_p` centering the mean of `v_p`.
pub fn initial_guess<T: Real>(samples: &[NormalizedObservation<T>]) -> RawOutput<T> {
    let n = T::from_count(samples.len().max(1));
    let mean_v = samples
        .iter()
        .fold(Vec2::zero(), |acc, o| acc + o.v_p)
        .scale(n.recip());
    let log_z = samples.iter().fold(T::zero(), |acc, o| acc + o.z_p.ln()) / n;
    let nu_z = log_z.exp();
    let two = T::one() + T::one();
    // a = 1 at w1 = 0.
    let w2 = if nu_z > T::one() {
        nu_z - T::one()
    } else {
        T::one() - nu_z.recip()
    };
    RawOutput {
        w: [
            T::zero(),
            T::zero(),
            T::zero(),
            two * mean_v.x,
            two * mean_v.y,
            T::zero(),
            w2,
        ],
    }
}

/// Fits with the default starting point.
pub fn fit_params<T: Real>(samples: &[NormalizedObservation<T>]) -> Result<FitResult<T>> {
    fit_params_from(samples, &initial_guess(samples))
}

/// Minimizes the mean loss over raw outputs with `w1 ≥ 0`, from `init`.
pub fn fit_params_from<T: Real>(
    samples: &[NormalizedObservation<T>],
    init: &RawOutput<T>,
) -> Result<FitResult<T>> {
    fit_params_with(samples, init, &SolverOptions::default())
}

/// [`fit_params_from`] with explicit solver settings; any bounds in `opts`
/// are replaced by `w1 ≥ 0`.
pub fn fit_params_with<T: Real>(
    samples: &[NormalizedObservation<T>],
    init: &RawOutput<T>,
    opts: &SolverOptions<T>,
) -> Result<FitResult<T>> {
    if samples.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "fit needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    for obs in samples {
        if !(obs.z_p > T::zero()) || !obs.z_p.is_finite() || !obs.v_p.is_finite() {
            return Err(Error::domain("observations need finite v_p and z_p > 0"));
        }
    }
    let mut lower = vec![None; 7];
    lower[5] = Some(T::zero());
    let opts = SolverOptions {
        lower,
        ..opts.clone()
    };
    let sol = minimize(
        |w: &[T]| {
            let mut raw = [T::zero(); 7];
            raw.copy_from_slice(w);
            let (value, g) = mean_loss(&RawOutput { w: raw }, samples);
            (value, g.to_vec())
        },
        &init.w,
        &opts,
    )?;
    let mut w = [T::zero(); 7];
    w.copy_from_slice(&sol.x);
    let raw = RawOutput { w };
    Ok(FitResult {
        raw,
        params: activate(&raw).params,
        loss: sol.value,
        iterations: sol.iterations,
        converged: sol.converged,
        at_boundary: w[5] <= T::zero() && sol.grad[5] > T::zero(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_samples() {
        let obs = NormalizedObservation::new(Vec2::new(0.0f64, 0.0), 1.0).unwrap();
        assert!(matches!(
            fit_params(&[obs, obs]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn repeated_point_becomes_mode() {
        let obs = NormalizedObservation::new(Vec2::new(0.2f64, -0.1), 1.3).unwrap();
        let fit = fit_params(&[obs; 5]).unwrap();
        let mode = fit.params.projected_mode();
        assert!((mode - obs.v_p).norm() < 1e-6, "{mode:?}");
        assert!(
            (fit.params.nu_z - obs.z_p).abs() < 1e-6 * obs.z_p,
            "{}",
            fit.params.nu_z
        );
    }

    #[test]
    fn mean_loss_gradient_matches_fd() {
        let samples: Vec<_> = [(0.1, 0.2, 1.1), (-0.3, 0.05, 0.8), (0.0, -0.2, 1.4)]
            .iter()
            .map(|&(x, y, z)| NormalizedObservation::new(Vec2::new(x, y), z).unwrap())
            .collect();
        let w = [0.4f64, -0.1, 0.2, 0.1, -0.05, 0.7, 0.3];
        let (_, g) = mean_loss(&RawOutput { w }, &samples);
        for i in 0..7 {
            let h = 1e-6;
            let (mut p, mut m) = (w, w);
            p[i] += h;
            m[i] -= h;
            let fd = (mean_loss(&RawOutput { w: p }, &samples).0
                - mean_loss(&RawOutput { w: m }, &samples).0)
                / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-6 * fd.abs().max(1.0), "i={i}");
        }
    }
}
