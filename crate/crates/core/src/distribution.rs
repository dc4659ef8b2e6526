//! The projected Huber distribution in camera coordinates.
//!
//! For a point `v = (x, y, z)` with `z > 0` the density is
//!
//! ```text
//! p(v) = exp(-h(‖A·(x/z - μx, y/z - μy)‖·z/μz) - a·max(z/μz, μz/z)) / K
//! K    = K_depth·K_proj
//! K_depth = μz·(e^{-a}/a + Γ(-1, a)·a)
//! K_proj  = μz²/|A| · 2π(1 + e^{-1/2})
//! ```
//!
//! and zero for `z ≤ 0`. The negative log density is convex in `v`: after the
//! shear `e = (x - z·μx, y - z·μy)` the first term is `h(‖A e‖/μz)`, a convex
//! function of an affine map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Point3, Vec2, Vec3};
use crate::scalar::{lit, Real};
use crate::special::{
    self, huber_radial_mass, huber_slope_over_r, huber_unchecked, huber_variance_factor,
};

/// World-frame (camera-frame) parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistParams<T> {
    /// Mean of the projected coordinates `(x/z, y/z)`.
    pub mu: Vec2<T>,
    /// Depth scale in meters.
    pub mu_z: T,
    /// Symmetric positive definite precision of the projected coordinates.
    pub precision: Mat2<T>,
    /// Depth concentration; larger means tighter depth.
    pub a: T,
}

impl<T: Real> DistParams<T> {
    /// Validated constructor.
    pub fn new(mu: Vec2<T>, mu_z: T, precision: Mat2<T>, a: T) -> Result<Self> {
        let p = Self {
            mu,
            mu_z,
            precision,
            a,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::domain("mu must be finite"));
        }
        if !(self.mu_z > T::zero() && self.mu_z.is_finite()) {
            return Err(Error::domain(format!(
                "mu_z must be > 0, got {}",
                self.mu_z
            )));
        }
        if !(self.a > T::zero() && self.a.is_finite()) {
            return Err(Error::domain(format!("a must be > 0, got {}", self.a)));
        }
        let m = &self.precision;
        if !m.is_finite() {
            return Err(Error::domain("precision must be finite"));
        }
        let scale = m.m[0][0].abs().max(m.m[1][1].abs()).max(T::one());
        if !m.is_symmetric(scale * T::epsilon() * lit(16.0)) {
            return Err(Error::domain("precision must be symmetric"));
        }
        if !(m.eig_min() > T::zero()) || !(m.det() > T::zero()) {
            return Err(Error::domain("precision must be positive definite"));
        }
        Ok(())
    }

    /// The mode `μz·(μx, μy, 1)`, used as the point prediction.
    pub fn mode(&self) -> Point3<T> {
        Point3::new(self.mu.x * self.mu_z, self.mu.y * self.mu_z, self.mu_z)
    }
}

/// Normalizing constants of the density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizers<T> {
    pub k_depth: T,
    pub k_proj: T,
    pub k_combined: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments<T> {
    /// `E[(x/z, y/z)]`.
    pub mean_proj: Vec2<T>,
    /// `Var[(x/z, y/z)]`.
    pub var_proj: Mat2<T>,
    pub mean_depth: T,
    pub var_depth: T,
}

/// A projected Huber distribution with its normalizer precomputed.
#[derive(Debug, Clone, Copy)]
pub struct ProjectedHuber<T> {
    params: DistParams<T>,
    precision_inv: Mat2<T>,
    /// `g1(a) = a²Γ(-1, a)eᵃ`.
    g1: T,
    log_k: T,
}

impl<T: Real> ProjectedHuber<T> {
    pub fn new(params: DistParams<T>) -> Result<Self> {
        params.validate()?;
        let precision_inv = params
            .precision
            .inverse()
            .ok_or_else(|| Error::domain("precision is singular"))?;
        let g1 = special::g1_unchecked(params.a, special::quadrature::DEFAULT_ORDER);
        let (log_depth, _) = special::log_norm_depth_from_g1(params.a, g1);
        let log_k = log_depth + lit::<T>(3.0) * params.mu_z.ln() - params.precision.det().ln()
            + (T::TAU() * huber_radial_mass::<T>()).ln();
        Ok(Self {
            params,
            precision_inv,
            g1,
            log_k,
        })
    }

    pub fn params(&self) -> &DistParams<T> {
        &self.params
    }

    /// `ln K_combined`.
    pub fn log_normalizer(&self) -> T {
        self.log_k
    }

    pub fn normalizers(&self) -> Normalizers<T> {
        let p = &self.params;
        let k_depth = p.mu_z * (-p.a).exp() / p.a * (T::one() + self.g1);
        let k_proj = p.mu_z * p.mu_z / p.precision.det() * T::TAU() * huber_radial_mass::<T>();
        Normalizers {
            k_depth,
            k_proj,
            k_combined: k_depth * k_proj,
        }
    }

    /// Log density; `-∞` for `z ≤ 0`.
    pub fn log_pdf(&self, v: Point3<T>) -> Result<T> {
        if !v.is_finite() {
            return Err(Error::domain("point must be finite"));
        }
        Ok(-self.nll_unchecked(v))
    }

    /// Negative log density and its gradient (a subgradient at kinks).
    ///
    /// Returns `(+∞, 0)` for `z ≤ 0`.
    pub fn nll_with_grad(&self, v: Point3<T>) -> Result<(T, Vec3<T>)> {
        if !v.is_finite() {
            return Err(Error::domain("point must be finite"));
        }
        Ok(self.nll_with_grad_unchecked(v))
    }

    pub(crate) fn nll_unchecked(&self, v: Point3<T>) -> T {
        if v.z <= T::zero() {
            return T::infinity();
        }
        let p = &self.params;
        let e = Vec2::new(v.x - v.z * p.mu.x, v.y - v.z * p.mu.y);
        let r = p.precision.mul_vec(e).norm() / p.mu_z;
        let (h, _) = huber_unchecked(r);
        h + p.a * (v.z / p.mu_z).max(p.mu_z / v.z) + self.log_k
    }

    pub(crate) fn nll_with_grad_unchecked(&self, v: Point3<T>) -> (T, Vec3<T>) {
        if v.z <= T::zero() {
            return (T::infinity(), Vec3::zero());
        }
        let p = &self.params;
        let e = Vec2::new(v.x - v.z * p.mu.x, v.y - v.z * p.mu.y);
        let q = p.precision.mul_vec(e).scale(p.mu_z.recip());
        let r = q.norm();
        let (h, _) = huber_unchecked(r);
        // ∂h/∂e = h'(r)/r · Aᵀq / μz
        let g_e = p
            .precision
            .transpose()
            .mul_vec(q)
            .scale(huber_slope_over_r(r) / p.mu_z);

        let up = v.z / p.mu_z;
        let down = p.mu_z / v.z;
        let (depth, d_depth) = if up >= down {
            (p.a * up, p.a / p.mu_z)
        } else {
            (p.a * down, -p.a * p.mu_z / (v.z * v.z))
        };
        let grad = Vec3::new(g_e.x, g_e.y, d_depth - (p.mu.x * g_e.x + p.mu.y * g_e.y));
        (h + depth + self.log_k, grad)
    }

    /// Analytic moments of the projected coordinates and of the depth.
    pub fn moments(&self) -> Moments<T> {
        let p = &self.params;
        let inv = self.precision_inv;
        let var_proj = (inv * inv).scale(huber_variance_factor::<T>());
        // Depth moments are ratios of G_{-k-1} + G_{k+1}, see `special`.
        let g_m1 = self.g1;
        let g_m2 = special::scaled_negative(-2, p.a, g_m1);
        let g_m3 = special::scaled_negative(-3, p.a, g_m1);
        let inv_a = p.a.recip();
        let g2 = T::one() + inv_a;
        let g3 = T::one() + lit::<T>(2.0) * inv_a + lit::<T>(2.0) * inv_a * inv_a;
        let m0 = T::one() + g_m1;
        let m1 = (g_m2 + g2) / m0;
        let m2 = (g_m3 + g3) / m0;
        Moments {
            mean_proj: p.mu,
            var_proj,
            mean_depth: p.mu_z * m1,
            var_depth: p.mu_z * p.mu_z * (m2 - m1 * m1),
        }
    }

    pub fn mode(&self) -> Point3<T> {
        self.params.mode()
    }

    /// `n` independent draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Point3<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample_one(&mut rng)).collect()
    }

    /// One draw from an arbitrary generator.
    ///
    /// Depth comes from inverse-CDF sampling of `s = ln(z/μz)`; given the
    /// depth, the Huber radius comes from its piecewise inverse CDF and the
    /// angle is uniform.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Point3<T> {
        let p = &self.params;
        let s = sample_log_depth(p.a, self.g1, rng);
        let z = p.mu_z * s.exp();
        let r = sample_huber_radius::<T, R>(rng);
        let theta = T::TAU() * lit::<T>(rng.random::<f64>());
        let (sin, cos) = theta.sin_cos();
        let q = Vec2::new(r * cos, r * sin);
        let offset = self.precision_inv.mul_vec(q).scale(p.mu_z / z);
        let proj = p.mu + offset;
        Point3::new(proj.x * z, proj.y * z, z)
    }
}

/// Uniform on `(0, 1]`.
fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// CDF tolerance of the numeric inversions.
const CDF_TOL: f64 = 1e-12;

/// Draws `s = ln(z/μz)`, whose density is proportional to `e^{s - a·e^{|s|}}`.
///
/// Mass of `s ≥ 0` is `e^{-a}/a`, mass of `s < 0` is `g1(a)·e^{-a}/a`. The
/// positive tail `exp(-a(eˢ - 1))` inverts in closed form; the negative tail
/// `Γ(-1, a·e^u)/Γ(-1, a)` with `u = -s` is inverted by Newton iteration.
fn sample_log_depth<T: Real, R: Rng + ?Sized>(a: T, g1a: T, rng: &mut R) -> T {
    let p_neg = g1a / (T::one() + g1a);
    let branch = lit::<T>(rng.random::<f64>());
    let v = lit::<T>(open_uniform(rng));
    if branch >= p_neg {
        return (-v.ln() / a).ln_1p();
    }
    -invert_negative_tail(a, g1a, v)
}

/// Solves `Γ(-1, a·e^u) / Γ(-1, a) = v` for `u ≥ 0`.
///
/// In logs, `φ(u) = ln g1(t) - ln g1(a) - (t - a) - 2u - ln v` with
/// `t = a·e^u` and `φ'(u) = -t / g1(t)`. `φ` is concave and decreasing, so
/// Newton iterates started right of the root decrease monotonically to it.
fn invert_negative_tail<T: Real>(a: T, g1a: T, v: T) -> T {
    let ln_v = v.ln();
    let ln_g1a = g1a.ln();
    let phi = |u: T| {
        let t = a * u.exp();
        let g = special::g1_unchecked(t, special::quadrature::DEFAULT_ORDER);
        (g.ln() - ln_g1a - (t - a) - lit::<T>(2.0) * u - ln_v, -t / g)
    };
    // Tail of the Exp(1 + a) envelope dominates the target tail, so its
    // quantile lies right of the root.
    let mut u = -ln_v / (T::one() + a);
    let tol = lit::<T>(CDF_TOL);
    for _ in 0..100 {
        let (f, df) = phi(u);
        // Tail = v·e^φ, so |Tail - v| ≈ v·|φ|.
        if (v * f).abs() <= tol {
            break;
        }
        let next = (u - f / df).max(T::zero());
        if next == u {
            break;
        }
        u = next;
    }
    u
}

/// Draws `r` with density proportional to `r·e^{-h(r)}`.
///
/// Unnormalized mass is `1 - e^{-1/2}` on `r ≤ 1` and `2e^{-1/2}` on `r > 1`,
/// where the tail mass is `(r + 1)·e^{1/2 - r}`.
fn sample_huber_radius<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let total = huber_radial_mass::<T>();
    let inner = T::one() - lit::<T>(-0.5).exp();
    let m = lit::<T>(rng.random::<f64>()) * total;
    if m <= inner {
        return (lit::<T>(-2.0) * (-m).ln_1p()).sqrt();
    }
    let tail = total - m;
    if tail <= T::zero() {
        return T::infinity();
    }
    let ln_tail = tail.ln();
    // ψ(r) = ln(r + 1) + 1/2 - r - ln(tail): concave, decreasing, ψ(1) ≥ 0.
    let mut r = T::one();
    let tol = lit::<T>(CDF_TOL);
    for _ in 0..100 {
        let psi = (r + T::one()).ln() + lit(0.5) - r - ln_tail;
        if (tail * psi).abs() <= tol {
            break;
        }
        let dpsi = (r + T::one()).recip() - T::one();
        let next = (r - psi / dpsi).max(T::one());
        if next == r {
            break;
        }
        r = next;
    }
    r
}
