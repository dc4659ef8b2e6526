//! Scalar special functions behind the normalizers, moments and losses.
//!
//! The incomplete gammas are handled in scaled form
//! `G_k(a) = Γ(k, a)·a^{1-k}·eᵃ`, which tends to 1 as `a → ∞` and keeps every
//! depth quantity O(1) instead of underflowing with `e^{-a}`.

pub mod quadrature;

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

pub use quadrature::{
    adaptive_simpson, gauss_legendre, gauss_legendre_rule, scaled_upper_gamma_adaptive,
    QuadratureConfig,
};

/// `∫₀^∞ r·e^{-h(r)} dr = 1 + e^{-1/2}`: radial mass of the 2D Huber kernel.
pub fn huber_radial_mass<T: Real>() -> T {
    T::one() + lit::<T>(-0.5).exp()
}

/// Variance factor of the unit 2D Huber kernel per axis,
/// `∫r³e^{-h} / (2∫r·e^{-h}) = (2 + 13e^{-1/2}) / (2 + 2e^{-1/2})`.
pub fn huber_variance_factor<T: Real>() -> T {
    let e = lit::<T>(-0.5).exp();
    (lit::<T>(2.0) + lit::<T>(13.0) * e) / (lit::<T>(2.0) + lit::<T>(2.0) * e)
}

/// Huber function `h(r) = r²/2` for `r ≤ 1`, `r - 1/2` otherwise, and its
/// derivative.
pub fn huber<T: Real>(r: T) -> Result<(T, T)> {
    if !(r >= T::zero()) {
        return Err(Error::domain(format!("huber needs r >= 0, got {r}")));
    }
    Ok(huber_unchecked(r))
}

#[inline]
pub(crate) fn huber_unchecked<T: Real>(r: T) -> (T, T) {
    if r <= T::one() {
        (r * r / lit(2.0), r)
    } else {
        (r - lit(0.5), T::one())
    }
}

/// `h'(r) / r`, which is 1 on the quadratic branch and `1/r` beyond.
#[inline]
pub(crate) fn huber_slope_over_r<T: Real>(r: T) -> T {
    if r <= T::one() {
        T::one()
    } else {
        r.recip()
    }
}

fn check_positive<T: Real>(name: &str, a: T) -> Result<()> {
    if a > T::zero() && a.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} needs a finite a > 0, got {a}"
        )))
    }
}

/// `g1(a) = a²·Γ(-1, a)·eᵃ` with the default 64-point rule.
///
/// Equals `∫₀¹ (1 + ln(1/y)/a)^{-2} dy`. The rule is applied after the
/// substitution `y = exp(-u/(1-u))`, which turns the integrand into
/// `exp(-u/(1-u)) / (1 - u + u/a)²`: smooth on `[0, 1)` with every derivative
/// vanishing at `u = 1`.
pub fn g1<T: Real>(a: T) -> Result<T> {
    g1_with(a, &QuadratureConfig::default())
}

pub fn g1_with<T: Real>(a: T, cfg: &QuadratureConfig<T>) -> Result<T> {
    check_positive("g1", a)?;
    Ok(g1_unchecked(a, cfg.node_count))
}

pub(crate) fn g1_unchecked<T: Real>(a: T, nodes: usize) -> T {
    let inv_a = a.recip();
    let integrand = |u: T| {
        let w = T::one() - u;
        if w <= T::zero() {
            return T::zero();
        }
        let d = w + u * inv_a;
        (-u / w).exp() / (d * d)
    };
    gauss_legendre(integrand, T::zero(), T::one(), nodes)
}

/// `g1` by adaptive Simpson on an independent integral representation, to
/// absolute tolerance `abs_tol`.
pub fn g1_adaptive<T: Real>(a: T, abs_tol: T) -> Result<T> {
    check_positive("g1_adaptive", a)?;
    Ok(scaled_upper_gamma_adaptive(-T::one(), a, abs_tol))
}

/// Above this `a`, scaled negative-order gammas come from the asymptotic
/// series, which is then accurate to full double precision.
pub const ASYMPTOTIC_THRESHOLD: f64 = 60.0;

/// Scaled upper incomplete gamma `G_k(a) = Γ(k, a)·a^{1-k}·eᵃ` for
/// `k ∈ {-3, -2, -1, 1, 2, 3}`.
pub fn scaled_upper_gamma<T: Real>(k: i32, a: T) -> Result<T> {
    check_positive("upper_gamma", a)?;
    let inv = a.recip();
    match k {
        1 => Ok(T::one()),
        2 => Ok(T::one() + inv),
        3 => Ok(T::one() + lit::<T>(2.0) * inv + lit::<T>(2.0) * inv * inv),
        -1 => Ok(g1_unchecked(a, quadrature::DEFAULT_ORDER)),
        -2 | -3 => Ok(scaled_negative(
            k,
            a,
            g1_unchecked(a, quadrature::DEFAULT_ORDER),
        )),
        _ => Err(Error::domain(format!("upper_gamma order {k} unsupported"))),
    }
}

/// `G_k` for `k ∈ {-2, -3}` given `G_{-1}`.
///
/// Uses the recurrence `Γ(s, x) = (Γ(s+1, x) - x^s e^{-x}) / s`, which in
/// scaled form reads `G_s = x·(G_{s+1} - 1) / s`, and the asymptotic series
/// past [`ASYMPTOTIC_THRESHOLD`].
pub(crate) fn scaled_negative<T: Real>(k: i32, a: T, g_m1: T) -> T {
    if a > lit(ASYMPTOTIC_THRESHOLD) {
        return scaled_asymptotic(k, a);
    }
    let g_m2 = a * (T::one() - g_m1) / lit(2.0);
    if k == -2 {
        g_m2
    } else {
        a * (T::one() - g_m2) / lit(3.0)
    }
}

/// `G_k(a) ~ Σₙ (k-1)(k-2)…(k-n) / aⁿ`, truncated at the smallest term.
fn scaled_asymptotic<T: Real>(k: i32, a: T) -> T {
    let kf = T::from_i32(k).expect("small int");
    let mut term = T::one();
    let mut sum = T::one();
    for n in 1..200 {
        let next = term * (kf - T::from_i32(n).expect("small int")) / a;
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum = sum + term;
        if term.abs() <= T::epsilon() * sum.abs() {
            break;
        }
    }
    sum
}

/// Upper incomplete gamma `Γ(k, a) = ∫_a^∞ t^{k-1} e^{-t} dt`.
///
/// Positive orders use closed forms, `k = -1` the 64-point quadrature of
/// [`g1`], and `k ∈ {-2, -3}` the downward recurrence from it.
pub fn upper_gamma<T: Real>(k: i32, a: T) -> Result<T> {
    let g = scaled_upper_gamma(k, a)?;
    let kf = T::from_i32(k).expect("small int");
    Ok(g * a.powf(kf - T::one()) * (-a).exp())
}

/// `ln(e^{-a}/a + Γ(-1, a)·a)` and its derivative in `a`.
///
/// Evaluated as `-ln a - a + ln(1 + g1(a))`; the derivative is
/// `1/a - 2(1/a + 1) / (1 + g1(a))`.
pub fn log_norm_depth<T: Real>(a: T) -> Result<(T, T)> {
    check_positive("log_norm_depth", a)?;
    Ok(log_norm_depth_from_g1(
        a,
        g1_unchecked(a, quadrature::DEFAULT_ORDER),
    ))
}

#[inline]
pub(crate) fn log_norm_depth_from_g1<T: Real>(a: T, g: T) -> (T, T) {
    let value = -a.ln() - a + g.ln_1p();
    let inv = a.recip();
    let deriv = inv - lit::<T>(2.0) * (inv + T::one()) / (T::one() + g);
    (value, deriv)
}
