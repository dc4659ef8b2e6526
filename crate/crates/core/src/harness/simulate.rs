//! Synthetic multi-camera rigs around a known point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::distribution::DistParams;
use crate::error::{Error, Result};
use crate::fusion::{CameraPose, ViewEstimate};
use crate::linalg::{Mat2, Point3, Vec2};
use crate::mapping::CameraIntrinsics;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig<T> {
    pub n_views: usize,
    pub truth: Point3<T>,
    /// Camera distance from the truth, meters.
    pub rig_radius: T,
    /// Standard deviation of the projected-mean jitter (`x/z` units).
    pub proj_jitter: T,
    /// Standard deviation of `ln(μz / true depth)`.
    pub depth_jitter: T,
    /// Range of the eigenvalues of `A`.
    pub precision_range: (T, T),
    /// Range of the depth concentration `a`.
    pub a_range: (T, T),
    pub focal: T,
    pub sensor: T,
    pub seed: u64,
}

impl<T: Real> Default for ScenarioConfig<T> {
    fn default() -> Self {
        Self {
            n_views: 4,
            truth: Point3::new(T::zero(), T::zero(), T::one()),
            rig_radius: T::lit(4.0),
            proj_jitter: T::lit(0.005),
            depth_jitter: T::lit(0.1),
            precision_range: (T::lit(150.0), T::lit(300.0)),
            a_range: (T::lit(8.0), T::lit(12.0)),
            focal: T::lit(1500.0),
            sensor: T::lit(1000.0),
            seed: 0,
        }
    }
}

impl<T: Real> ScenarioConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive_range = |(lo, hi): (T, T)| lo > T::zero() && lo <= hi && hi.is_finite();
        if self.n_views == 0 {
            return Err(Error::domain("n_views must be >= 1"));
        }
        if !self.truth.is_finite() {
            return Err(Error::domain("truth must be finite"));
        }
        if !(self.rig_radius > T::zero() && self.rig_radius.is_finite()) {
            return Err(Error::domain("rig_radius must be > 0"));
        }
        if !(self.proj_jitter >= T::zero() && self.proj_jitter.is_finite())
            || !(self.depth_jitter >= T::zero() && self.depth_jitter.is_finite())
        {
            return Err(Error::domain("jitters must be finite and >= 0"));
        }
        if !positive_range(self.precision_range) || !positive_range(self.a_range) {
            return Err(Error::domain(
                "precision and a ranges must be positive with lo <= hi",
            ));
        }
        CameraIntrinsics::new(self.focal, self.sensor)?;
        Ok(())
    }
}

fn uniform<T: Real, R: Rng>(rng: &mut R, (lo, hi): (T, T)) -> T {
    lo + (hi - lo) * T::lit(rng.random::<f64>())
}

/// Cameras evenly spaced on a horizontal circle around the truth, each
/// looking at it, with estimates jittered around the truth's projection and
/// depth. Deterministic in `config.seed`.
pub fn simulate_rig<T: Real>(config: &ScenarioConfig<T>) -> Result<Vec<ViewEstimate<T>>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let intrinsics = CameraIntrinsics::new(config.focal, config.sensor)?;
    let half_fov = config.sensor / (T::lit(2.0) * config.focal);
    let phase = T::TAU() * T::lit(rng.random::<f64>());
    let n = T::from_count(config.n_views);

    let mut views = Vec::with_capacity(config.n_views);
    for k in 0..config.n_views {
        let theta = phase + T::TAU() * T::from_count(k) / n;
        let (sin, cos) = theta.sin_cos();
        let eye = config.truth + Point3::new(cos, sin, T::zero()).scale(config.rig_radius);
        let pose = CameraPose::look_at(eye, config.truth)?;
        let local = pose.to_camera(config.truth);
        if !(local.z > T::zero())
            || local.x.abs() >= half_fov * local.z
            || local.y.abs() >= half_fov * local.z
        {
            return Err(Error::domain(
                "truth falls outside a camera's field of view",
            ));
        }

        let jx = T::lit(unit.sample(&mut rng)) * config.proj_jitter;
        let jy = T::lit(unit.sample(&mut rng)) * config.proj_jitter;
        let jz = T::lit(unit.sample(&mut rng)) * config.depth_jitter;
        let mu = Vec2::new(local.x / local.z + jx, local.y / local.z + jy);
        let mu_z = local.z * jz.exp();

        let angle = T::PI() * T::lit(rng.random::<f64>());
        let (s, c) = angle.sin_cos();
        let rot = Mat2::new(c, -s, s, c);
        let eig = Mat2::diag(
            uniform(&mut rng, config.precision_range),
            uniform(&mut rng, config.precision_range),
        );
        let precision = rot * eig * rot.transpose();
        let precision = Mat2::symmetric(precision.m[0][0], precision.m[0][1], precision.m[1][1]);
        let a = uniform(&mut rng, config.a_range);

        let params = DistParams::new(mu, mu_z, precision, a)?;
        views.push(ViewEstimate::new(pose, intrinsics, params)?);
    }
    Ok(views)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::fuse;

    #[test]
    fn deterministic() {
        let cfg = ScenarioConfig::<f64> {
            seed: 9,
            ..Default::default()
        };
        assert_eq!(simulate_rig(&cfg).unwrap(), simulate_rig(&cfg).unwrap());
        let other = ScenarioConfig { seed: 10, ..cfg };
        assert_ne!(simulate_rig(&cfg).unwrap(), simulate_rig(&other).unwrap());
    }

    #[test]
    fn zero_noise_fuses_to_truth() {
        let cfg = ScenarioConfig::<f64> {
            proj_jitter: 0.0,
            depth_jitter: 0.0,
            truth: Point3::new(0.4, -0.2, 1.5),
            seed: 3,
            ..Default::default()
        };
        let views = simulate_rig(&cfg).unwrap();
        let res = fuse(&views, None).unwrap();
        assert!((res.point - cfg.truth).norm() < 1e-6, "{res:?}");
    }

    #[test]
    fn rejects_bad_config() {
        let bad = ScenarioConfig::<f64> {
            n_views: 0,
            ..Default::default()
        };
        assert!(simulate_rig(&bad).is_err());
        let bad = ScenarioConfig::<f64> {
            a_range: (2.0, 1.0),
            ..Default::default()
        };
        assert!(simulate_rig(&bad).is_err());
    }
}
