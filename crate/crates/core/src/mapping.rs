//! Network-basis parameterization.
//!
//! Observations are expressed in a focal-length-free basis
//!
//! ```text
//! v_p = 2f·(x, y) / (z·S)        z_p = z / (μz0·f)
//! ```
//!
//! in which the negative log likelihood becomes
//!
//! ```text
//! L = h(‖B v_p - ν_p‖·z_p) - ln|B| + a·max(z_p/ν_z, ν_z/z_p) + ln(e^{-a}/a + aΓ(-1, a)) + ln ν_z
//! ```
//!
//! up to a constant that depends only on the camera and the dataset.

use crate::distribution::DistParams;
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Point3, SymEigen2, Vec2};
use crate::scalar::{lit, Real};
use crate::special::{self, huber_radial_mass, huber_slope_over_r, huber_unchecked};

/// Pinhole intrinsics: focal length and sensor side, both in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics<T> {
    pub f: T,
    pub s: T,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(f: T, s: T) -> Result<Self> {
        if !(f > T::zero() && f.is_finite()) {
            return Err(Error::domain(format!("focal length must be > 0, got {f}")));
        }
        if !(s > T::zero() && s.is_finite()) {
            return Err(Error::domain(format!("sensor size must be > 0, got {s}")));
        }
        Ok(Self { f, s })
    }
}

/// Dataset normalization constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats<T> {
    /// Geometric mean of the extreme `z/f` values.
    pub mu_z0: T,
    /// Square root of the ratio of the extreme `z/f` values.
    pub d: T,
}

impl<T: Real> DatasetStats<T> {
    pub fn new(mu_z0: T, d: T) -> Result<Self> {
        if !(mu_z0 > T::zero() && mu_z0.is_finite()) {
            return Err(Error::domain(format!("mu_z0 must be > 0, got {mu_z0}")));
        }
        if !(d >= T::one() && d.is_finite()) {
            return Err(Error::domain(format!("D must be >= 1, got {d}")));
        }
        Ok(Self { mu_z0, d })
    }

    fn from_extremes(lo: T, hi: T) -> Self {
        Self {
            mu_z0: (lo * hi).sqrt(),
            d: (hi / lo).sqrt().max(T::one()),
        }
    }
}

/// Scans `(z, f)` samples for the extremes of `z/f`.
pub fn compute_stats<T: Real>(samples: &[(T, T)]) -> Result<DatasetStats<T>> {
    if samples.is_empty() {
        return Err(Error::InsufficientData(
            "compute_stats needs at least one sample".into(),
        ));
    }
    let mut lo = T::infinity();
    let mut hi = T::zero();
    for &(z, f) in samples {
        if !(z > T::zero() && z.is_finite()) {
            return Err(Error::domain(format!("depth must be > 0, got {z}")));
        }
        if !(f > T::zero() && f.is_finite()) {
            return Err(Error::domain(format!("focal length must be > 0, got {f}")));
        }
        let r = z / f;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok(DatasetStats::from_extremes(lo, hi))
}

/// Stats from known depth and focal-length ranges, `(min, max)` each.
pub fn stats_from_ranges<T: Real>(z: (T, T), f: (T, T)) -> Result<DatasetStats<T>> {
    for (name, (lo, hi)) in [("depth", z), ("focal length", f)] {
        if !(lo > T::zero() && lo <= hi && hi.is_finite()) {
            return Err(Error::domain(format!("invalid {name} range [{lo}, {hi}]")));
        }
    }
    Ok(DatasetStats::from_extremes(z.0 / f.1, z.1 / f.0))
}

/// A point in the network basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedObservation<T> {
    pub v_p: Vec2<T>,
    pub z_p: T,
}

impl<T: Real> NormalizedObservation<T> {
    pub fn new(v_p: Vec2<T>, z_p: T) -> Result<Self> {
        if !v_p.is_finite() {
            return Err(Error::domain("v_p must be finite"));
        }
        if !(z_p > T::zero() && z_p.is_finite()) {
            return Err(Error::domain(format!("z_p must be > 0, got {z_p}")));
        }
        Ok(Self { v_p, z_p })
    }
}

pub fn normalize_obs<T: Real>(
    v: Point3<T>,
    cam: &CameraIntrinsics<T>,
    stats: &DatasetStats<T>,
) -> Result<NormalizedObservation<T>> {
    if !v.is_finite() {
        return Err(Error::domain("point must be finite"));
    }
    if !(v.z > T::zero()) {
        return Err(Error::domain(format!("depth must be > 0, got {}", v.z)));
    }
    let k = lit::<T>(2.0) * cam.f / (v.z * cam.s);
    Ok(NormalizedObservation {
        v_p: Vec2::new(v.x * k, v.y * k),
        z_p: v.z / (stats.mu_z0 * cam.f),
    })
}

pub fn denormalize_obs<T: Real>(
    obs: &NormalizedObservation<T>,
    cam: &CameraIntrinsics<T>,
    stats: &DatasetStats<T>,
) -> Point3<T> {
    let z = obs.z_p * stats.mu_z0 * cam.f;
    let k = z * cam.s / (lit::<T>(2.0) * cam.f);
    Point3::new(obs.v_p.x * k, obs.v_p.y * k, z)
}

/// Raw 7-dimensional network output: `(w_B[3], w_ν[2], w1, w2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawOutput<T> {
    pub w: [T; 7],
}

impl<T: Real> RawOutput<T> {
    pub fn new(w: [T; 7]) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("raw output must be finite"));
        }
        Ok(Self { w })
    }

    pub fn zeros() -> Self {
        Self { w: [T::zero(); 7] }
    }
}

/// Distribution parameters in the network basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedParams<T> {
    pub nu_p: Vec2<T>,
    pub nu_z: T,
    pub b: Mat2<T>,
    pub a: T,
}

impl<T: Real> NormalizedParams<T> {
    pub fn new(nu_p: Vec2<T>, nu_z: T, b: Mat2<T>, a: T) -> Result<Self> {
        let p = Self { nu_p, nu_z, b, a };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.nu_p.is_finite() {
            return Err(Error::domain("nu_p must be finite"));
        }
        if !(self.nu_z > T::zero() && self.nu_z.is_finite()) {
            return Err(Error::domain(format!(
                "nu_z must be > 0, got {}",
                self.nu_z
            )));
        }
        if !(self.a > T::zero() && self.a.is_finite()) {
            return Err(Error::domain(format!("a must be > 0, got {}", self.a)));
        }
        let b = &self.b;
        let scale = b.m[0][0].abs().max(b.m[1][1].abs()).max(T::one());
        if !b.is_finite() || !b.is_symmetric(scale * T::epsilon() * lit(16.0)) {
            return Err(Error::domain("B must be finite and symmetric"));
        }
        if !(b.eig_min() > T::one()) {
            return Err(Error::domain("B must have eigenvalues > 1"));
        }
        Ok(())
    }

    /// Projected mode `B⁻¹ν_p` in the network basis.
    pub fn projected_mode(&self) -> Vec2<T> {
        self.b
            .inverse()
            .map(|inv| inv.mul_vec(self.nu_p))
            .unwrap_or(self.nu_p)
    }
}

/// Lower end of the exponential branch: `ln √ε`.
///
/// Below it [`positive_map`] is held constant so that `a`, `ν_z` and the
/// smallest eigenvalue of `B - I` stay representably positive.
fn saturation<T: Real>() -> T {
    T::epsilon().sqrt().ln()
}

/// `exp(x)` for `x < 0`, `x + 1` otherwise, and its derivative.
///
/// The exponential branch saturates at `√ε` for `x < ln √ε`.
#[inline]
pub fn positive_map<T: Real>(x: T) -> (T, T) {
    if x < T::zero() {
        let floor = saturation::<T>();
        if x < floor {
            (floor.exp(), T::zero())
        } else {
            let e = x.exp();
            (e, e)
        }
    } else {
        (x + T::one(), T::one())
    }
}

/// `φ(y) - φ(c)` for `c` on the exponential branch and `y ≥ c`.
fn positive_map_rise<T: Real>(y: T, c: T) -> T {
    if y < T::zero() {
        c.exp() * (y - c).exp_m1()
    } else {
        y - c.exp_m1()
    }
}

/// Divided difference `(φ(x) - φ(y)) / (x - y)` of [`positive_map`],
/// continuous across `x = y`.
fn positive_map_divided<T: Real>(x: T, y: T) -> T {
    let zero = T::zero();
    let floor = saturation::<T>();
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    if hi < floor {
        return zero;
    }
    if lo < floor {
        return positive_map_rise(hi, floor) / (hi - lo);
    }
    match (lo < zero, hi < zero) {
        (false, false) => T::one(),
        (true, true) => {
            let half = (hi - lo) / lit(2.0);
            let shrink = if half == zero {
                T::one()
            } else {
                half.sinh() / half
            };
            ((lo + hi) / lit(2.0)).exp() * shrink
        }
        _ => positive_map_rise(hi, lo) / (hi - lo),
    }
}

/// Activation together with what its chain rule needs.
#[derive(Debug, Clone, Copy)]
pub struct Activated<T> {
    pub params: NormalizedParams<T>,
    eigen: SymEigen2<T>,
    /// Divided differences of the spectral map, indexed by eigenpair.
    gamma: Mat2<T>,
    da_dw1: T,
    dnu_da: T,
    dnu_dw2: T,
}

/// Maps a raw output to valid normalized parameters.
///
/// `a` and `ν_z` follow the scalar maps in the module docs. `B` is the
/// spectral image of `W = [[w0, w1], [w1, w2]]` under `λ ↦ 1 + φ(λ)` with
/// `φ` = [`positive_map`], so `eigmin(B) > 1`, `B(0) = 2I` and `B = W + 2I`
/// whenever `W ⪰ 0`.
pub fn activation<T: Real>(raw: &RawOutput<T>) -> NormalizedParams<T> {
    activate(raw).params
}

pub fn activate<T: Real>(raw: &RawOutput<T>) -> Activated<T> {
    let w = &raw.w;
    let wm = Mat2::symmetric(w[0], w[1], w[2]);
    let eigen = wm.sym_eigen();
    let [l0, l1] = eigen.values;
    let (p0, d0) = positive_map(l0);
    let (p1, d1) = positive_map(l1);
    let b = eigen.compose([T::one() + p0, T::one() + p1]);
    // Exact symmetry and an eigenvalue floor of 1 can be lost to rounding
    // when one eigenvalue underflows; restore both.
    let off = (b.m[0][1] + b.m[1][0]) / lit(2.0);
    let b = Mat2::symmetric(b.m[0][0], off, b.m[1][1]);
    let cross = positive_map_divided(l0, l1);
    let gamma = Mat2::symmetric(d0, cross, d1);

    let (a, da_dw1) = positive_map(w[5]);
    let w2 = w[6];
    let (nu_z, dnu_da, dnu_dw2) = if w2 > T::zero() {
        (T::one() + w2 / a, -w2 / (a * a), a.recip())
    } else {
        let den = a - w2;
        (a / den, -w2 / (den * den), a / (den * den))
    };
    let nu_z = nu_z.max(T::min_positive_value()).min(T::max_value());
    Activated {
        params: NormalizedParams {
            nu_p: Vec2::new(w[3], w[4]),
            nu_z,
            b,
            a,
        },
        eigen,
        gamma,
        da_dw1,
        dnu_da,
        dnu_dw2,
    }
}

impl<T: Real> Activated<T> {
    /// Pulls a gradient over `(ν_p, ν_z, B, a)` back to the raw output.
    pub fn pull_back(&self, g: &ParamGrad<T>) -> [T; 7] {
        let u = self.eigen.vectors;
        let ut = u.transpose();
        let inner = ut * g.b * u;
        let scaled = Mat2::new(
            inner.m[0][0] * self.gamma.m[0][0],
            inner.m[0][1] * self.gamma.m[0][1],
            inner.m[1][0] * self.gamma.m[1][0],
            inner.m[1][1] * self.gamma.m[1][1],
        );
        let gw = u * scaled * ut;
        let g_a_total = g.a + g.nu_z * self.dnu_da;
        [
            gw.m[0][0],
            gw.m[0][1] + gw.m[1][0],
            gw.m[1][1],
            g.nu_p.x,
            g.nu_p.y,
            g_a_total * self.da_dw1,
            g.nu_z * self.dnu_dw2,
        ]
    }
}

/// Maps normalized parameters to world (camera) parameters.
///
/// `μz = ν_z·μz0·f`, `(μx, μy) = S/(2f)·B⁻¹ν_p` and `A = 2f·ν_z·B/S`. With
/// these, `-log p(v) = L(np; normalize_obs(v)) + `[`world_loss_offset`].
pub fn normalized_to_world<T: Real>(
    np: &NormalizedParams<T>,
    cam: &CameraIntrinsics<T>,
    stats: &DatasetStats<T>,
) -> Result<DistParams<T>> {
    np.validate()?;
    let inv =
        np.b.inverse()
            .ok_or_else(|| Error::domain("B is singular"))?;
    let half_fov = cam.s / (lit::<T>(2.0) * cam.f);
    let mu = inv.mul_vec(np.nu_p).scale(half_fov);
    let precision = np.b.scale(np.nu_z / half_fov);
    DistParams::new(mu, np.nu_z * stats.mu_z0 * cam.f, precision, np.a)
}

/// Constant `-log p_world - L`, independent of the point and the parameters.
pub fn world_loss_offset<T: Real>(cam: &CameraIntrinsics<T>, stats: &DatasetStats<T>) -> T {
    let two = lit::<T>(2.0);
    (T::TAU() * huber_radial_mass::<T>()).ln()
        + two * (cam.s * stats.mu_z0 / two).ln()
        + (stats.mu_z0 * cam.f).ln()
}

/// Gradient of the loss with respect to the normalized parameters.
///
/// `b` holds `∂L/∂B_ij` with all four entries treated as independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamGrad<T> {
    pub nu_p: Vec2<T>,
    pub nu_z: T,
    pub b: Mat2<T>,
    pub a: T,
}

/// Loss and gradient of one observation.
pub fn loss<T: Real>(
    np: &NormalizedParams<T>,
    obs: &NormalizedObservation<T>,
) -> Result<(T, ParamGrad<T>)> {
    np.validate()?;
    check_obs(obs)?;
    let depth_norm = special::log_norm_depth(np.a)?;
    Ok(loss_unchecked(np, depth_norm, obs))
}

/// Composition of [`activation`] and [`loss`], with the gradient over `w`.
pub fn loss_from_raw<T: Real>(
    raw: &RawOutput<T>,
    obs: &NormalizedObservation<T>,
) -> Result<(T, [T; 7])> {
    if raw.w.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("raw output must be finite"));
    }
    check_obs(obs)?;
    let act = activate(raw);
    let depth_norm = special::log_norm_depth(act.params.a)?;
    let (value, g) = loss_unchecked(&act.params, depth_norm, obs);
    Ok((value, act.pull_back(&g)))
}

fn check_obs<T: Real>(obs: &NormalizedObservation<T>) -> Result<()> {
    if !(obs.z_p > T::zero()) {
        return Err(Error::domain(format!("z_p must be > 0, got {}", obs.z_p)));
    }
    if !obs.v_p.is_finite() || !obs.z_p.is_finite() {
        return Err(Error::domain("observation must be finite"));
    }
    Ok(())
}

/// Loss with `log_norm_depth(a)` supplied by the caller.
pub(crate) fn loss_unchecked<T: Real>(
    np: &NormalizedParams<T>,
    depth_norm: (T, T),
    obs: &NormalizedObservation<T>,
) -> (T, ParamGrad<T>) {
    let z2 = obs.z_p * obs.z_p;
    let e = np.b.mul_vec(obs.v_p) - np.nu_p;
    let r = e.norm() * obs.z_p;
    let (h, _) = huber_unchecked(r);
    let k = huber_slope_over_r(r) * z2;
    let det = np.b.det();
    let b_inv_t =
        Mat2::new(np.b.m[1][1], -np.b.m[1][0], -np.b.m[0][1], np.b.m[0][0]).scale(det.recip());
    let g_b = Mat2::outer(e, obs.v_p).scale(k) - b_inv_t;
    let g_nu_p = e.scale(-k);

    let (up, down) = (obs.z_p / np.nu_z, np.nu_z / obs.z_p);
    let (regression, g_nu_z, g_a) = if up >= down {
        (np.a * up, -np.a * up / np.nu_z, up)
    } else {
        (np.a * down, np.a / obs.z_p, down)
    };
    let (norm, d_norm) = depth_norm;
    let value = h - det.ln() + regression + norm + np.nu_z.ln();
    (
        value,
        ParamGrad {
            nu_p: g_nu_p,
            nu_z: g_nu_z + np.nu_z.recip(),
            b: g_b,
            a: g_a + d_norm,
        },
    )
}

/// The depth regression term `a·max(z_p/ν_z, ν_z/z_p)` as a function of
/// `(w1, w2)`, with its gradient.
pub fn depth_regression<T: Real>(w1: T, w2: T, z_p: T) -> (T, [T; 2]) {
    let mut w = [T::zero(); 7];
    w[5] = w1;
    w[6] = w2;
    let act = activate(&RawOutput { w });
    let np = &act.params;
    let (up, down) = (z_p / np.nu_z, np.nu_z / z_p);
    let (value, g_nu_z, g_a) = if up >= down {
        (np.a * up, -np.a * up / np.nu_z, up)
    } else {
        (np.a * down, np.a / z_p, down)
    };
    let g_w1 = (g_a + g_nu_z * act.dnu_da) * act.da_dw1;
    let g_w2 = g_nu_z * act.dnu_dw2;
    (value, [g_w1, g_w2])
}
