//! Descent solver for the convex objectives in this crate.
//!
//! Quasi-Newton (BFGS) directions with Armijo backtracking; steepest descent
//! when the quasi-Newton direction fails. `+∞` objective values act as a
//! barrier, and coordinates may carry lower bounds, enforced by projection.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions<T> {
    /// Stop once the projected gradient norm falls below this.
    pub grad_tol: T,
    /// Stop once an accepted step is shorter than this, or no step this long
    /// decreases the objective.
    pub step_tol: T,
    pub max_iter: usize,
    /// Sufficient-decrease constant.
    pub armijo: T,
    /// Backtracking factor.
    pub shrink: T,
    /// Per-coordinate lower bounds.
    pub lower: Vec<Option<T>>,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            grad_tol: lit(1e-8),
            step_tol: lit(1e-12),
            max_iter: 10_000,
            armijo: lit(1e-4),
            shrink: lit(0.5),
            lower: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub x: Vec<T>,
    pub value: T,
    pub grad: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

struct Bounds<'a, T> {
    lower: &'a [Option<T>],
}

impl<T: Real> Bounds<'_, T> {
    fn bound(&self, i: usize) -> Option<T> {
        self.lower.get(i).copied().flatten()
    }

    fn project(&self, x: &mut [T]) {
        for (i, xi) in x.iter_mut().enumerate() {
            if let Some(lo) = self.bound(i) {
                if *xi < lo {
                    *xi = lo;
                }
            }
        }
    }

    /// Coordinates pinned at their bound with the gradient pushing outward.
    fn active(&self, x: &[T], g: &[T]) -> Vec<bool> {
        (0..x.len())
            .map(|i| matches!(self.bound(i), Some(lo) if x[i] <= lo && g[i] > T::zero()))
            .collect()
    }
}

/// Minimizes `f` from `x0`. `f` returns the value and a (sub)gradient.
///
/// Fails with an infeasibility error if `f(x0)` is not finite.
pub fn minimize<T, F>(mut f: F, x0: &[T], opts: &SolverOptions<T>) -> Result<Solution<T>>
where
    T: Real,
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    let n = x0.len();
    let bounds = Bounds { lower: &opts.lower };
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return Err(Error::Infeasible(
            "objective is not finite at the starting point".into(),
        ));
    }

    let mut h = identity(n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        let active = bounds.active(&x, &g);
        let pg: Vec<T> = g
            .iter()
            .zip(&active)
            .map(|(&gi, &a)| if a { T::zero() } else { gi })
            .collect();
        if norm(&pg) < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut dir = if fresh {
            steepest(&pg)
        } else {
            quasi_newton(&h, &pg, &active)
        };
        if dot(&dir, &pg) >= T::zero() {
            h = identity(n);
            fresh = true;
            dir = steepest(&pg);
        }

        let step = line_search(&mut f, &bounds, &x, fx, &g, &dir, fresh, opts).or_else(|| {
            if fresh {
                None
            } else {
                dir = steepest(&pg);
                line_search(&mut f, &bounds, &x, fx, &g, &dir, true, opts)
            }
        });
        let Some((x_new, f_new, g_new)) = step else {
            converged = true;
            break;
        };

        let s: Vec<T> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let step_len = norm(&s);
        let sy = dot(&s, &y);
        if sy > T::epsilon() * norm(&s) * norm(&y) {
            if fresh {
                // Scale the initial inverse Hessian to the observed curvature.
                let scale = sy / dot(&y, &y);
                h = identity::<T>(n).into_iter().map(|v| v * scale).collect();
            }
            bfgs_update(&mut h, &s, &y, sy);
            fresh = false;
        }

        x = x_new;
        fx = f_new;
        g = g_new;
        if step_len < opts.step_tol {
            converged = true;
            break;
        }
    }

    Ok(Solution {
        x,
        value: fx,
        grad: g,
        iterations,
        converged,
    })
}

fn identity<T: Real>(n: usize) -> Vec<T> {
    let mut h = vec![T::zero(); n * n];
    for i in 0..n {
        h[i * n + i] = T::one();
    }
    h
}

fn steepest<T: Real>(g: &[T]) -> Vec<T> {
    g.iter().map(|&v| -v).collect()
}

fn quasi_newton<T: Real>(h: &[T], g: &[T], active: &[bool]) -> Vec<T> {
    let n = g.len();
    (0..n)
        .map(|i| {
            if active[i] {
                return T::zero();
            }
            -(0..n)
                .filter(|&j| !active[j])
                .fold(T::zero(), |acc, j| acc + h[i * n + j] * g[j])
        })
        .collect()
}

/// `H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ` with `ρ = 1/(yᵀs)`.
fn bfgs_update<T: Real>(h: &mut [T], s: &[T], y: &[T], sy: T) {
    let n = s.len();
    let rho = sy.recip();
    let hy: Vec<T> = (0..n)
        .map(|i| (0..n).fold(T::zero(), |acc, j| acc + h[i * n + j] * y[j]))
        .collect();
    let yhy = dot(y, &hy);
    let coef = (T::one() + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = h[i * n + j] - rho * (hy[i] * s[j] + s[i] * hy[j]) + coef * s[i] * s[j];
        }
    }
}

/// Backtracking along `dir`; returns the accepted point, value and gradient.
#[allow(clippy::too_many_arguments)]
fn line_search<T, F>(
    f: &mut F,
    bounds: &Bounds<'_, T>,
    x: &[T],
    fx: T,
    g: &[T],
    dir: &[T],
    fresh: bool,
    opts: &SolverOptions<T>,
) -> Option<(Vec<T>, T, Vec<T>)>
where
    T: Real,
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    let dnorm = norm(dir);
    if !(dnorm > T::zero()) || !dnorm.is_finite() {
        return None;
    }
    // A steepest-descent step has no natural length; start at unit length.
    let mut t = if fresh {
        T::one().min(dnorm.recip())
    } else {
        T::one()
    };
    let mut candidate = vec![T::zero(); x.len()];
    loop {
        for i in 0..x.len() {
            candidate[i] = x[i] + t * dir[i];
        }
        bounds.project(&mut candidate);
        let moved = candidate
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
            .sqrt();
        if moved < opts.step_tol {
            return None;
        }
        let (fc, gc) = f(&candidate);
        let decrease = candidate
            .iter()
            .zip(x)
            .zip(g)
            .fold(T::zero(), |acc, ((&c, &xi), &gi)| acc + gi * (c - xi));
        if fc.is_finite() && fc <= fx + opts.armijo * decrease && fc <= fx {
            return Some((candidate, fc, gc));
        }
        t = t * opts.shrink;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0] - 1.0, x[1] + 2.0);
            (3.0 * a * a + a * b + b * b, vec![6.0 * a + b, a + 2.0 * b])
        };
        let sol = minimize(f, &[5.0, 5.0], &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.x[0] - 1.0).abs() < 1e-8 && (sol.x[1] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (v, g)
        };
        let sol = minimize(f, &[-1.2, 1.0], &SolverOptions::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-6 && (sol.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn barrier_and_kink() {
        // |x - 1/2| + 1/x on x > 0: minimum at x = 1 where the derivative is zero.
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                return (f64::INFINITY, vec![0.0]);
            }
            let v = (x[0] - 0.5).abs() + 1.0 / x[0];
            let s = if x[0] >= 0.5 { 1.0 } else { -1.0 };
            (v, vec![s - 1.0 / (x[0] * x[0])])
        };
        let sol = minimize(f, &[0.05], &SolverOptions::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-6, "{:?}", sol.x);
    }

    #[test]
    fn nonsmooth_minimum_at_kink() {
        let f = |x: &[f64]| {
            let v = (x[0] - 0.3).abs() * 2.0 + (x[1] + 0.1).powi(2);
            (v, vec![2.0 * (x[0] - 0.3).signum(), 2.0 * (x[1] + 0.1)])
        };
        let sol = minimize(f, &[3.0, 2.0], &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.value < 1e-9, "{sol:?}");
    }

    #[test]
    fn lower_bound_is_respected() {
        let f = |x: &[f64]| {
            (
                (x[0] + 1.0).powi(2) + (x[1] - 1.0).powi(2),
                vec![2.0 * (x[0] + 1.0), 2.0 * (x[1] - 1.0)],
            )
        };
        let opts = SolverOptions {
            lower: vec![Some(0.0), None],
            ..SolverOptions::default()
        };
        let sol = minimize(f, &[2.0, -3.0], &opts).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.x[0], 0.0);
        assert!((sol.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn infeasible_start() {
        let f = |_: &[f64]| (f64::INFINITY, vec![0.0]);
        assert!(matches!(
            minimize(f, &[1.0], &SolverOptions::default()),
            Err(Error::Infeasible(_))
        ));
    }
}
