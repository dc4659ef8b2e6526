//! Maximum-likelihood fusion of per-view estimates.
//!
//! Each view contributes `-log p(Rᵀ(v - t))` to a convex objective over the
//! world point `v`; the fused estimate minimizes the sum, optionally on a
//! plane `dᵀv = c`.

use crate::distribution::{DistParams, ProjectedHuber};
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Point3, Vec3};
use crate::mapping::CameraIntrinsics;
use crate::scalar::{lit, Real};
use crate::solver::{minimize, SolverOptions};

/// Rigid camera pose: `v_world = R·v_cam + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose<T> {
    pub r: Mat3<T>,
    pub t: Vec3<T>,
}

impl<T: Real> CameraPose<T> {
    pub fn new(r: Mat3<T>, t: Vec3<T>) -> Result<Self> {
        if !t.is_finite() || r.m.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::domain("pose must be finite"));
        }
        let tol = lit::<T>(1e-10).max(T::epsilon() * lit(64.0));
        if r.orthogonality_error() > tol {
            return Err(Error::domain("R must be orthonormal"));
        }
        if !(r.det() > T::zero()) {
            return Err(Error::domain("R must have determinant +1"));
        }
        Ok(Self { r, t })
    }

    pub fn identity() -> Self {
        Self {
            r: Mat3::identity(),
            t: Vec3::zero(),
        }
    }

    /// Camera at `eye` with its optical axis pointing at `target`.
    pub fn look_at(eye: Point3<T>, target: Point3<T>) -> Result<Self> {
        let forward = target - eye;
        if !(forward.norm() > T::zero()) || !forward.is_finite() {
            return Err(Error::domain(
                "look_at needs distinct finite eye and target",
            ));
        }
        let z = forward.normalized();
        let up = if z.z.abs() < lit(0.9) {
            Vec3::new(T::zero(), T::zero(), T::one())
        } else {
            Vec3::new(T::zero(), T::one(), T::zero())
        };
        let x = up.cross(z).normalized();
        let y = z.cross(x);
        Self::new(Mat3::from_columns(x, y, z), eye)
    }

    pub fn to_camera(&self, v: Point3<T>) -> Point3<T> {
        self.r.tr_mul_vec(v - self.t)
    }

    pub fn to_world(&self, v: Point3<T>) -> Point3<T> {
        self.r.mul_vec(v) + self.t
    }

    /// `self` followed by the rigid map `v ↦ r·v + t`.
    pub fn transformed(&self, r: &Mat3<T>, t: Vec3<T>) -> Self {
        Self {
            r: *r * self.r,
            t: r.mul_vec(self.t) + t,
        }
    }
}

/// One camera's estimate: pose, intrinsics and camera-frame parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewEstimate<T> {
    pub pose: CameraPose<T>,
    pub intrinsics: CameraIntrinsics<T>,
    pub params: DistParams<T>,
}

impl<T: Real> ViewEstimate<T> {
    pub fn new(
        pose: CameraPose<T>,
        intrinsics: CameraIntrinsics<T>,
        params: DistParams<T>,
    ) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            pose,
            intrinsics,
            params,
        })
    }

    /// The view's mode in world coordinates.
    pub fn world_mode(&self) -> Point3<T> {
        self.pose.to_world(self.params.mode())
    }
}

/// Plane `dᵀv = c` with unit normal `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane<T> {
    pub d: Vec3<T>,
    pub c: T,
}

impl<T: Real> Plane<T> {
    pub fn new(d: Vec3<T>, c: T) -> Result<Self> {
        if !d.is_finite() || !c.is_finite() {
            return Err(Error::domain("plane must be finite"));
        }
        let tol = lit::<T>(1e-12).max(T::epsilon() * lit(8.0));
        if (d.norm() - T::one()).abs() > tol {
            return Err(Error::domain(format!(
                "plane normal must be unit length, got norm {}",
                d.norm()
            )));
        }
        Ok(Self { d, c })
    }

    /// Orthogonal projection of `v` onto the plane.
    pub fn project(&self, v: Point3<T>) -> Point3<T> {
        v - self.d.scale(self.d.dot(v) - self.c)
    }

    /// A point on the plane and two orthonormal in-plane directions.
    fn frame(&self) -> (Point3<T>, Vec3<T>, Vec3<T>) {
        let n = self.d.normalized();
        let helper = if n.x.abs() < lit(0.6) {
            Vec3::new(T::one(), T::zero(), T::zero())
        } else {
            Vec3::new(T::zero(), T::one(), T::zero())
        };
        let e1 = helper.cross(n).normalized();
        let e2 = n.cross(e1);
        (n.scale(self.c / self.d.norm()), e1, e2)
    }
}

/// A view with its density normalizer precomputed.
struct PreparedView<T> {
    pose: CameraPose<T>,
    dist: ProjectedHuber<T>,
}

impl<T: Real> PreparedView<T> {
    fn new(view: &ViewEstimate<T>) -> Result<Self> {
        Ok(Self {
            pose: view.pose,
            dist: ProjectedHuber::new(view.params)?,
        })
    }

    fn nll(&self, v: Point3<T>) -> T {
        self.dist.nll_unchecked(self.pose.to_camera(v))
    }

    fn nll_with_grad(&self, v: Point3<T>) -> (T, Vec3<T>) {
        let (value, g) = self.dist.nll_with_grad_unchecked(self.pose.to_camera(v));
        (value, self.pose.r.mul_vec(g))
    }
}

/// Negative log likelihood of a world point under one view, with gradient.
pub fn nll_world<T: Real>(v: Point3<T>, view: &ViewEstimate<T>) -> Result<(T, Vec3<T>)> {
    if !v.is_finite() {
        return Err(Error::domain("point must be finite"));
    }
    Ok(PreparedView::new(view)?.nll_with_grad(v))
}

/// Summed negative log likelihood over views.
pub fn total_nll<T: Real>(v: Point3<T>, views: &[ViewEstimate<T>]) -> Result<T> {
    let prepared = prepare(views)?;
    Ok(sum_nll(&prepared, v))
}

/// Evaluates a fixed set of views repeatedly without redoing setup.
pub struct FusionObjective<T> {
    views: Vec<PreparedView<T>>,
}

impl<T: Real> FusionObjective<T> {
    pub fn new(views: &[ViewEstimate<T>]) -> Result<Self> {
        Ok(Self {
            views: prepare(views)?,
        })
    }

    pub fn value(&self, v: Point3<T>) -> T {
        sum_nll(&self.views, v)
    }

    pub fn value_and_grad(&self, v: Point3<T>) -> (T, Vec3<T>) {
        sum_nll_with_grad(&self.views, v)
    }
}

fn prepare<T: Real>(views: &[ViewEstimate<T>]) -> Result<Vec<PreparedView<T>>> {
    if views.is_empty() {
        return Err(Error::InsufficientData(
            "at least one view is required".into(),
        ));
    }
    views.iter().map(PreparedView::new).collect()
}

fn sum_nll<T: Real>(views: &[PreparedView<T>], v: Point3<T>) -> T {
    views.iter().fold(T::zero(), |acc, pv| acc + pv.nll(v))
}

fn sum_nll_with_grad<T: Real>(views: &[PreparedView<T>], v: Point3<T>) -> (T, Vec3<T>) {
    views
        .iter()
        .fold((T::zero(), Vec3::zero()), |(acc, g), pv| {
            let (value, gi) = pv.nll_with_grad(v);
            (acc + value, g + gi)
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionResult<T> {
    pub point: Point3<T>,
    pub nll: T,
    pub iterations: usize,
    pub converged: bool,
}

/// First finite-objective point among `candidates`, also trying points
/// bisected from each candidate toward `anchor`.
fn feasible_start<T: Real>(
    value: impl Fn(Point3<T>) -> T,
    candidates: &[Point3<T>],
    anchor: Point3<T>,
) -> Option<Point3<T>> {
    for &c in candidates {
        if value(c).is_finite() {
            return Some(c);
        }
    }
    for &c in candidates {
        let mut p = c;
        for _ in 0..60 {
            p = (p + anchor).scale(lit(0.5));
            if value(p).is_finite() {
                return Some(p);
            }
        }
    }
    None
}

/// Fused maximum-likelihood point of `views`.
///
/// Starts from `init` if its objective is finite, otherwise from the mean of
/// the world-frame modes, moved toward the first mode until finite.
pub fn fuse<T: Real>(
    views: &[ViewEstimate<T>],
    init: Option<Point3<T>>,
) -> Result<FusionResult<T>> {
    fuse_with(views, init, &SolverOptions::default())
}

pub fn fuse_with<T: Real>(
    views: &[ViewEstimate<T>],
    init: Option<Point3<T>>,
    opts: &SolverOptions<T>,
) -> Result<FusionResult<T>> {
    let prepared = prepare(views)?;
    let modes: Vec<Point3<T>> = views.iter().map(ViewEstimate::world_mode).collect();
    let centroid = modes
        .iter()
        .fold(Point3::zero(), |acc, &m| acc + m)
        .scale(T::from_count(modes.len()).recip());
    let mut candidates = Vec::new();
    if let Some(p) = init.filter(|p| p.is_finite()) {
        candidates.push(p);
    }
    candidates.push(centroid);
    candidates.extend_from_slice(&modes);
    let start =
        feasible_start(|v| sum_nll(&prepared, v), &candidates, modes[0]).ok_or_else(|| {
            Error::Infeasible("no point with finite likelihood under every view".into())
        })?;

    let sol = minimize(
        |x: &[T]| {
            let (value, g) = sum_nll_with_grad(&prepared, Point3::new(x[0], x[1], x[2]));
            (value, vec![g.x, g.y, g.z])
        },
        &start.to_array(),
        opts,
    )?;
    Ok(FusionResult {
        point: Point3::new(sol.x[0], sol.x[1], sol.x[2]),
        nll: sol.value,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Maximum-likelihood point of `views` restricted to `plane`.
pub fn plane_mle<T: Real>(views: &[ViewEstimate<T>], plane: &Plane<T>) -> Result<FusionResult<T>> {
    plane_mle_with(views, plane, &SolverOptions::default())
}

pub fn plane_mle_with<T: Real>(
    views: &[ViewEstimate<T>],
    plane: &Plane<T>,
    opts: &SolverOptions<T>,
) -> Result<FusionResult<T>> {
    let prepared = prepare(views)?;
    let (origin, e1, e2) = plane.frame();
    let to_plane = |u: [T; 2]| origin + e1.scale(u[0]) + e2.scale(u[1]);
    let to_coords = |v: Point3<T>| {
        let rel = v - origin;
        [rel.dot(e1), rel.dot(e2)]
    };

    let modes: Vec<Point3<T>> = views
        .iter()
        .map(|v| plane.project(v.world_mode()))
        .collect();
    let centroid = modes
        .iter()
        .fold(Point3::zero(), |acc, &m| acc + m)
        .scale(T::from_count(modes.len()).recip());
    let mut candidates = vec![centroid];
    candidates.extend_from_slice(&modes);
    // Points straight ahead of each camera, on the plane.
    for view in views {
        let axis = view.pose.r.column(2);
        let denom = plane.d.dot(axis);
        if denom.abs() > T::epsilon() {
            let s = (plane.c - plane.d.dot(view.pose.t)) / denom;
            if s > T::zero() {
                candidates.push(view.pose.t + axis.scale(s));
            }
        }
    }
    let in_plane = |v: Point3<T>| to_plane(to_coords(v));
    let candidates: Vec<Point3<T>> = candidates.into_iter().map(in_plane).collect();
    let start = feasible_start(|v| sum_nll(&prepared, v), &candidates, candidates[0])
        .ok_or_else(|| Error::Infeasible("the plane has no point with finite likelihood".into()))?;

    let sol = minimize(
        |u: &[T]| {
            let v = to_plane([u[0], u[1]]);
            let (value, g) = sum_nll_with_grad(&prepared, v);
            (value, vec![g.dot(e1), g.dot(e2)])
        },
        &to_coords(start),
        opts,
    )?;
    let point = to_plane([sol.x[0], sol.x[1]]);
    Ok(FusionResult {
        point,
        nll: sol.value,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Mat2, Vec2};

    fn cam() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(1500.0, 1000.0).unwrap()
    }

    fn params(mu: (f64, f64), mu_z: f64) -> DistParams<f64> {
        DistParams::new(
            Vec2::new(mu.0, mu.1),
            mu_z,
            Mat2::symmetric(40.0, 5.0, 30.0),
            6.0,
        )
        .unwrap()
    }

    #[test]
    fn pose_validation() {
        let bad = Mat3::from_rows([[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(CameraPose::new(bad, Vec3::zero()).is_err());
        let flip = Mat3::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]);
        assert!(CameraPose::new(flip, Vec3::zero()).is_err());
    }

    #[test]
    fn look_at_points_axis_at_target() {
        let eye = Point3::new(2.0f64, -1.0, 0.5);
        let target = Point3::new(0.0, 0.3, 0.1);
        let pose = CameraPose::look_at(eye, target).unwrap();
        let local = pose.to_camera(target);
        assert!(local.x.abs() < 1e-14 && local.y.abs() < 1e-14);
        assert!((local.z - (target - eye).norm()).abs() < 1e-14);
        assert!((pose.r.det() - 1.0).abs() < 1e-14);
        let down = CameraPose::look_at(Point3::new(0.0f64, 0.0, 3.0), Point3::zero()).unwrap();
        assert!((down.to_camera(Point3::zero()).z - 3.0).abs() < 1e-14);
    }

    #[test]
    fn nll_world_identity_and_behind() {
        let view =
            ViewEstimate::new(CameraPose::identity(), cam(), params((0.1, 0.0), 3.0)).unwrap();
        let v = Point3::new(0.2, 0.1, 2.5);
        let (value, _) = nll_world(v, &view).unwrap();
        let direct = -ProjectedHuber::new(view.params)
            .unwrap()
            .log_pdf(v)
            .unwrap();
        assert_eq!(value, direct);
        assert_eq!(
            nll_world(Point3::new(0.0, 0.0, -1.0), &view).unwrap().0,
            f64::INFINITY
        );
    }

    #[test]
    fn single_view_fusion_is_mode() {
        let pose =
            CameraPose::look_at(Point3::new(1.0, 2.0, 0.0), Point3::new(0.0, 0.0, 0.5)).unwrap();
        let view = ViewEstimate::new(pose, cam(), params((0.05, -0.02), 2.0)).unwrap();
        let res = fuse(&[view], None).unwrap();
        assert!((res.point - view.world_mode()).norm() < 1e-6, "{res:?}");
    }

    #[test]
    fn symmetric_pair_lands_on_symmetry_plane() {
        let target = Point3::zero();
        let left = CameraPose::look_at(Point3::new(-1.0, -3.0, 0.0), target).unwrap();
        let right = CameraPose::look_at(Point3::new(1.0, -3.0, 0.0), target).unwrap();
        let p = DistParams::new(
            Vec2::new(0.0, 0.0),
            3.0f64.hypot(1.0) * 1.02,
            Mat2::scaled_identity(50.0),
            5.0,
        )
        .unwrap();
        let views = [
            ViewEstimate::new(left, cam(), p).unwrap(),
            ViewEstimate::new(right, cam(), p).unwrap(),
        ];
        let res = fuse(&views, None).unwrap();
        assert!(res.point.x.abs() < 1e-6, "{res:?}");
    }

    #[test]
    fn plane_through_mode() {
        let view =
            ViewEstimate::new(CameraPose::identity(), cam(), params((0.1, 0.05), 2.0)).unwrap();
        let mode = view.world_mode();
        let d = Vec3::new(0.3, -0.5, 0.8).normalized();
        let plane = Plane::new(d, d.dot(mode)).unwrap();
        let res = plane_mle(&[view], &plane).unwrap();
        assert!((res.point - mode).norm() < 1e-6);
        assert!((plane.d.dot(res.point) - plane.c).abs() < 1e-10);
    }

    #[test]
    fn plane_behind_every_camera_is_infeasible() {
        let view =
            ViewEstimate::new(CameraPose::identity(), cam(), params((0.0, 0.0), 2.0)).unwrap();
        let plane = Plane::new(Vec3::new(0.0, 0.0, 1.0), -1.0).unwrap();
        assert!(matches!(
            plane_mle(&[view], &plane),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn empty_views() {
        assert!(fuse::<f64>(&[], None).is_err());
    }
}
