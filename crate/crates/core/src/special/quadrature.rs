//! Fixed-order Gauss–Legendre rules and an adaptive Simpson integrator.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Settings for the quadrature behind the depth normalizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig<T> {
    /// Gauss–Legendre order.
    pub node_count: usize,
    /// Absolute tolerance of the adaptive Simpson cross-check.
    pub abs_tol: T,
}

impl<T: Real> QuadratureConfig<T> {
    pub fn new(node_count: usize, abs_tol: T) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::domain(format!(
                "node_count must be >= 2, got {node_count}"
            )));
        }
        if !(abs_tol > T::zero()) {
            return Err(Error::domain(format!("abs_tol must be > 0, got {abs_tol}")));
        }
        Ok(Self {
            node_count,
            abs_tol,
        })
    }
}

impl<T: Real> Default for QuadratureConfig<T> {
    fn default() -> Self {
        Self {
            node_count: DEFAULT_ORDER,
            abs_tol: T::lit(1e-12),
        }
    }
}

pub const DEFAULT_ORDER: usize = 64;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Nodes come from Newton iteration on `P_n` started at the Tricomi
/// approximation; they are returned in ascending order.
pub fn gauss_legendre_rule(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = vec![(0.0, 0.0); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let k = i as f64 + 1.0;
        let mut x = (std::f64::consts::PI * (k - 0.25) / (nf + 0.5)).cos()
            * (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let pnm1 = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
    (pn, d)
}

fn default_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_rule(DEFAULT_ORDER))
}

/// Integrates `f` over `[lo, hi]` with the `n`-point Gauss–Legendre rule.
pub fn gauss_legendre<T: Real>(f: impl Fn(T) -> T, lo: T, hi: T, n: usize) -> T {
    let half = (hi - lo) / T::lit(2.0);
    let mid = (hi + lo) / T::lit(2.0);
    let apply = |rule: &[(f64, f64)]| {
        rule.iter().fold(T::zero(), |acc, &(x, w)| {
            acc + T::lit(w) * f(mid + half * T::lit(x))
        }) * half
    };
    if n == DEFAULT_ORDER {
        apply(default_rule())
    } else {
        apply(&gauss_legendre_rule(n))
    }
}

/// Adaptive Simpson quadrature of `f` over `[lo, hi]` to absolute tolerance
/// `abs_tol`, with at most `max_depth` bisection levels.
pub fn adaptive_simpson<T: Real>(
    f: impl Fn(T) -> T,
    lo: T,
    hi: T,
    abs_tol: T,
    max_depth: u32,
) -> T {
    let two = T::lit(2.0);
    let mid = (lo + hi) / two;
    let (fa, fm, fb) = (f(lo), f(mid), f(hi));
    let whole = simpson(lo, hi, fa, fm, fb);
    simpson_step(&f, lo, hi, fa, fm, fb, whole, abs_tol, max_depth)
}

fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<T: Real>(
    f: &impl Fn(T) -> T,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> T {
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * tol {
        return left + right + delta / T::lit(15.0);
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / two, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / two, depth - 1)
}

/// `Γ(k, a)·a^{1-k}·eᵃ` by adaptive Simpson on `∫₀^∞ (1 + s/a)^{k-1} e^{-s} ds`.
///
/// Independent of the Gauss–Legendre route; used to cross-check it. The
/// integral is truncated at `s = 45`, where the tail is below `3e-20`.
pub fn scaled_upper_gamma_adaptive<T: Real>(k: T, a: T, abs_tol: T) -> T {
    let km1 = k - T::one();
    let integrand = |s: T| (T::one() + s / a).powf(km1) * (-s).exp();
    // Split at the scale of the (1 + s/a) factor so the first panel resolves it.
    let split = a.min(T::lit(45.0));
    let head = adaptive_simpson(integrand, T::zero(), split, abs_tol / T::lit(2.0), 50);
    let tail = adaptive_simpson(integrand, split, T::lit(45.0), abs_tol / T::lit(2.0), 50);
    head + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_weights_sum_to_two() {
        for n in [2, 5, 16, 64, 100] {
            let s: f64 = gauss_legendre_rule(n).iter().map(|p| p.1).sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
        }
    }

    #[test]
    fn rule_is_exact_for_polynomials() {
        // 2n-1 degree exactness: ∫₀¹ x^9 dx = 0.1 with n = 5.
        let v = gauss_legendre(|x: f64| x.powi(9), 0.0, 1.0, 5);
        assert!((v - 0.1).abs() < 1e-15);
    }

    #[test]
    fn two_point_nodes() {
        let r = gauss_legendre_rule(2);
        let x = 1.0 / 3f64.sqrt();
        assert!((r[0].0 + x).abs() < 1e-15 && (r[1].0 - x).abs() < 1e-15);
        assert!((r[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_simpson_known_integrals() {
        let v = adaptive_simpson(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 50);
        assert!((v - 2.0).abs() < 1e-11);
        let v = adaptive_simpson(|x: f64| (-x).exp(), 0.0, 40.0, 1e-13, 50);
        assert!((v - (1.0 - (-40f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureConfig::new(1, 1e-12).is_err());
        assert!(QuadratureConfig::new(8, 0.0).is_err());
        assert!(QuadratureConfig::new(8, 1e-9).is_ok());
    }

    #[test]
    fn scaled_gamma_adaptive_positive_orders() {
        // G_2(a) = 1 + 1/a, G_3(a) = 1 + 2/a + 2/a².
        for a in [0.5f64, 2.0, 10.0] {
            let g2 = scaled_upper_gamma_adaptive(2.0, a, 1e-13);
            let g3 = scaled_upper_gamma_adaptive(3.0, a, 1e-13);
            assert!((g2 - (1.0 + 1.0 / a)).abs() < 1e-11, "a={a}");
            assert!(
                (g3 - (1.0 + 2.0 / a + 2.0 / (a * a))).abs() < 1e-10,
                "a={a}"
            );
        }
    }
}
