//! Runtime invariant suites.
//!
//! Each suite runs a battery of property checks on freshly drawn random
//! inputs and reports one line per check. Sample sizes come from
//! [`VerifyConfig`]; the defaults finish in a few seconds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::distribution::{DistParams, ProjectedHuber};
use crate::fusion::{fuse, CameraPose, FusionObjective, ViewEstimate};
use crate::harness::calibration::calibration_curve;
use crate::harness::fit::fit_params;
use crate::harness::simulate::{simulate_rig, ScenarioConfig};
use crate::linalg::{Mat2, Mat3, Point3, Vec2, Vec3};
use crate::mapping::{
    activation, depth_regression, loss_from_raw, normalize_obs, normalized_to_world, positive_map,
    world_loss_offset, CameraIntrinsics, DatasetStats, NormalizedObservation, NormalizedParams,
    RawOutput,
};
use crate::special::{self, huber_variance_factor};

pub const SUITES: [&str; 5] = ["special_fn", "distribution", "mapping", "fusion", "harness"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Monte Carlo sample size for the statistical checks.
    pub samples: usize,
    /// Random chords / points for the convexity and gradient checks.
    pub chords: usize,
    /// Random problems for the fusion checks.
    pub trials: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 200_000,
            chords: 10_000,
            trials: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub details: Vec<String>,
}

struct Checks {
    passed: bool,
    details: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            passed: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.passed &= ok;
        let tag = if ok { "ok" } else { "FAIL" };
        self.details.push(format!("{name}: {tag} ({detail})"));
    }

    /// A measurement reported without a verdict.
    fn note(&mut self, name: &str, detail: String) {
        self.details.push(format!("{name}: note ({detail})"));
    }

    fn finish(self, suite: &str) -> SuiteReport {
        SuiteReport {
            suite: suite.to_string(),
            passed: self.passed,
            details: self.details,
        }
    }
}

/// Runs the named suites (all of [`SUITES`] when `names` is empty).
pub fn run_suites(names: &[String], cfg: &VerifyConfig) -> Result<Vec<SuiteReport>, String> {
    let selected: Vec<&str> = if names.is_empty() {
        SUITES.to_vec()
    } else {
        names.iter().map(String::as_str).collect()
    };
    selected
        .iter()
        .map(|&name| {
            let stream = SUITES
                .iter()
                .position(|&s| s == name)
                .ok_or_else(|| format!("unknown suite '{name}'"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream as u64);
            Ok(match name {
                "special_fn" => special_suite(),
                "distribution" => distribution_suite(cfg, &mut rng),
                "mapping" => mapping_suite(cfg, &mut rng),
                "fusion" => fusion_suite(cfg, &mut rng),
                _ => harness_suite(cfg, &mut rng),
            })
        })
        .collect()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (l + (h - l) * i as f64 / (n - 1) as f64).exp())
}

fn special_suite() -> SuiteReport {
    let mut c = Checks::new();

    let mut worst = 0.0f64;
    let mut in_unit = true;
    for a in log_grid(0.05, 50.0, 50) {
        let g = special::g1(a).unwrap();
        in_unit &= g > 0.0 && g < 1.0;
        worst = worst.max((g - special::g1_adaptive(a, 1e-12).unwrap()).abs());
    }
    c.check(
        "g1 gauss-legendre vs adaptive simpson",
        worst < 1e-9,
        format!("max diff {worst:.3e}"),
    );
    c.check(
        "g1 in (0, 1)",
        in_unit,
        "50 log-spaced a in [0.05, 50]".into(),
    );

    let mut worst = 0.0f64;
    for a in log_grid(0.1, 20.0, 40) {
        for k in [-2, -3] {
            let rec = special::scaled_upper_gamma(k, a).unwrap();
            let direct = special::scaled_upper_gamma_adaptive(k as f64, a, 1e-14);
            worst = worst.max(((rec - direct) / direct).abs());
        }
    }
    c.check(
        "gamma recurrence vs direct quadrature",
        worst < 1e-8,
        format!("max rel {worst:.3e}"),
    );

    let g100 = special::g1(100.0f64).unwrap();
    c.check(
        "g1(100) near 1",
        (g100 - 1.0).abs() < 0.03,
        format!("g1(100) = {g100:.6}"),
    );
    let increasing = log_grid(0.05, 100.0, 200)
        .map(|a| special::g1(a).unwrap())
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1] > w[0]);
    c.check(
        "g1 increasing",
        increasing,
        "200 log-spaced a in [0.05, 100]".into(),
    );

    let bounds_ok = log_grid(0.01, 100.0, 200).all(|a| {
        let k = (-a).exp() / a * (1.0 + special::g1(a).unwrap());
        (-a).exp() / a <= k && k <= (-a).exp() * (1.0 / a + 1.0)
    });
    c.check(
        "depth normalizer bounds",
        bounds_ok,
        "200 log-spaced a in [0.01, 100]".into(),
    );

    let sup = (1..=10_000)
        .map(|i| 1.0 + i as f64 * 0.01)
        .map(|a| special::log_norm_depth(a).unwrap().1.abs())
        .fold(0.0, f64::max);
    c.check(
        "log_norm_depth derivative bound for a > 1",
        sup <= 4.0,
        format!("sup {sup:.4}"),
    );
    c.finish("special_fn")
}

fn random_spd(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Mat2<f64> {
    let angle = std::f64::consts::PI * rng.random::<f64>();
    let (s, c) = angle.sin_cos();
    let rot = Mat2::new(c, -s, s, c);
    let m = rot * Mat2::diag(rng.random_range(lo..hi), rng.random_range(lo..hi)) * rot.transpose();
    Mat2::symmetric(m.m[0][0], m.m[0][1], m.m[1][1])
}

fn random_params(rng: &mut ChaCha8Rng) -> DistParams<f64> {
    DistParams::new(
        Vec2::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)),
        rng.random_range(0.5..5.0),
        random_spd(rng, 0.5, 4.0),
        rng.random_range(0.5..10.0),
    )
    .unwrap()
}

/// `∫ p` on a grid in `(ln z, q)` with `q = A(x/z - μ)·z/μz`, where
/// `dx dy dz = μz²/|A| · z · d(ln z) dq`.
pub fn grid_mass(params: &DistParams<f64>, q_half: f64, q_step: f64, s_steps: usize) -> f64 {
    let dist = ProjectedHuber::new(*params).unwrap();
    let inv = params.precision.inverse().unwrap();
    let jac = params.mu_z * params.mu_z / params.precision.det();
    let s_hi = (1.0 + 45.0 / params.a).ln();
    let s_lo = -s_hi;
    let ds = (s_hi - s_lo) / s_steps as f64;
    let nq = (2.0 * q_half / q_step).round() as usize;
    let mut total = 0.0;
    for i in 0..s_steps {
        let s = s_lo + (i as f64 + 0.5) * ds;
        let z = params.mu_z * s.exp();
        let mut slab = 0.0;
        for j in 0..nq {
            let q1 = -q_half + (j as f64 + 0.5) * q_step;
            for k in 0..nq {
                let q2 = -q_half + (k as f64 + 0.5) * q_step;
                let p = params.mu + inv.mul_vec(Vec2::new(q1, q2)).scale(params.mu_z / z);
                slab += dist
                    .log_pdf(Point3::new(p.x * z, p.y * z, z))
                    .unwrap()
                    .exp();
            }
        }
        total += slab * z;
    }
    total * jac * ds * q_step * q_step
}

/// Importance-sampling estimate of `∫ p` with a wider proposal drawn by
/// `sample`; returns `(estimate, standard error)`.
pub fn importance_mass(params: &DistParams<f64>, n: usize, seed: u64) -> (f64, f64) {
    let proposal = DistParams {
        mu_z: params.mu_z * 1.05,
        precision: params.precision.scale(0.8),
        a: params.a * 0.8,
        ..*params
    };
    let target = ProjectedHuber::new(*params).unwrap();
    let q = ProjectedHuber::new(proposal).unwrap();
    let (mut s1, mut s2) = (0.0, 0.0);
    for v in q.sample(n, seed) {
        let w = (target.log_pdf(v).unwrap() - q.log_pdf(v).unwrap()).exp();
        s1 += w;
        s2 += w * w;
    }
    let nf = n as f64;
    let mean = s1 / nf;
    (mean, ((s2 / nf - mean * mean) / nf).sqrt())
}

struct MomentCheck {
    worst_z: f64,
}

/// Largest deviation, in standard errors, of sample moments from the analytic ones.
fn moment_deviation(params: &DistParams<f64>, n: usize, seed: u64) -> MomentCheck {
    let dist = ProjectedHuber::new(*params).unwrap();
    let m = dist.moments();
    let pts = dist.sample(n, seed);
    let nf = n as f64;
    let series: [Vec<f64>; 3] = [
        pts.iter().map(|v| v.x / v.z).collect(),
        pts.iter().map(|v| v.y / v.z).collect(),
        pts.iter().map(|v| v.z).collect(),
    ];
    let analytic_mean = [m.mean_proj.x, m.mean_proj.y, m.mean_depth];
    let analytic_var = [m.var_proj.m[0][0], m.var_proj.m[1][1], m.var_depth];
    let mut worst: f64 = 0.0;
    for k in 0..3 {
        let xs = &series[k];
        let mean = xs.iter().sum::<f64>() / nf;
        let c2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
        let c4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
        let se_mean = (analytic_var[k] / nf).sqrt();
        let se_var = ((c4 - c2 * c2) / nf).sqrt();
        worst = worst.max(((mean - analytic_mean[k]) / se_mean).abs());
        worst = worst.max(((c2 - analytic_var[k]) / se_var).abs());
    }
    MomentCheck { worst_z: worst }
}

fn distribution_suite(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut c = Checks::new();
    let n = cfg.samples;

    for i in 0..3 {
        let p = random_params(rng);
        let (mc, se) = importance_mass(&p, n, rng.random());
        let grid = grid_mass(&p, 16.0, 0.25, 400);
        c.check(
            &format!("normalization set {i}"),
            (mc - 1.0).abs() < 0.01 && (grid - 1.0).abs() < 0.01,
            format!("monte carlo {mc:.5} ± {se:.1e}, grid {grid:.5}"),
        );
    }

    let unit = DistParams::new(Vec2::new(0.0, 0.0), 1.0, Mat2::identity(), 1.0).unwrap();
    let d = ProjectedHuber::new(unit).unwrap();
    let behind = [
        Point3::new(0.0, 0.0, -1.0),
        Point3::new(3.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, -1e-300),
    ];
    let zero_ok = behind
        .iter()
        .all(|&v| d.log_pdf(v).unwrap() == f64::NEG_INFINITY);
    let positive_ok = (0..1000).all(|_| {
        let v = Point3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(1e-3..10.0),
        );
        d.log_pdf(v).unwrap().exp() > 0.0
    });
    c.check(
        "support",
        zero_ok && positive_ok,
        "zero for z <= 0, positive for 1000 points with z > 0".into(),
    );

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cfg.chords {
        let p = random_params(rng);
        let dist = ProjectedHuber::new(p).unwrap();
        let pt = |rng: &mut ChaCha8Rng| {
            let z = p.mu_z * rng.random_range(0.05..4.0);
            Point3::new(
                z * (p.mu.x + rng.random_range(-2.0..2.0)),
                z * (p.mu.y + rng.random_range(-2.0..2.0)),
                z,
            )
        };
        let (a, b) = (pt(rng), pt(rng));
        let mid = (a + b).scale(0.5);
        let f = |v| -dist.log_pdf(v).unwrap();
        worst = worst.max(f(mid) - (f(a) + f(b)) / 2.0);
    }
    c.check(
        "log-concavity chords",
        worst <= 1e-9,
        format!("{} chords, max violation {worst:.3e}", cfg.chords),
    );

    let p = random_params(rng);
    let dist = ProjectedHuber::new(p).unwrap();
    let sphere_max = |r: f64, rng: &mut ChaCha8Rng| {
        (0..1000)
            .map(|_| {
                let u = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
                .normalized();
                dist.log_pdf(u.scale(r * p.mu_z)).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let maxima: Vec<f64> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&r| sphere_max(r, rng))
        .collect();
    c.check(
        "decay",
        maxima.windows(2).all(|w| w[1] < w[0]) && maxima[2] < -50.0,
        format!("max log density at 10, 100, 1000 mu_z: {maxima:.1?}"),
    );

    let near_zero_ok = [1.0, 2.0, 5.0].iter().all(|&a| {
        let dist = ProjectedHuber::new(DistParams { a, ..unit }).unwrap();
        dist.log_pdf(Point3::new(0.0, 0.0, 1e-8)).unwrap() < (1e-30f64).ln()
    });
    c.check(
        "continuity at z -> 0",
        near_zero_ok,
        "density below 1e-30 at z = 1e-8 mu_z".into(),
    );

    let mut worst = 0.0f64;
    for _ in 0..3 {
        let p = random_params(rng);
        worst = worst.max(moment_deviation(&p, n, rng.random()).worst_z);
    }
    c.check(
        "sampled moments",
        worst < 4.0,
        format!("worst deviation {worst:.2} standard errors over 3 sets"),
    );

    let shifted = DistParams::new(
        Vec2::new(0.3, -0.1),
        2.0,
        Mat2::symmetric(3.0, 0.5, 2.0),
        4.0,
    )
    .unwrap();
    let dist = ProjectedHuber::new(shifted).unwrap();
    let xs: Vec<f64> = dist
        .sample(n, rng.random())
        .iter()
        .map(|v| v.x / v.z)
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = (dist.moments().var_proj.m[0][0] / n as f64).sqrt();
    c.check(
        "sample mean of x/z",
        ((mean - 0.3) / se).abs() < 3.0,
        format!("{mean:.6} vs 0.3, se {se:.1e}"),
    );

    let mode = dist.mode();
    let at_mode = dist.log_pdf(mode).unwrap();
    let local = (0..100).all(|_| {
        let u = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalized();
        dist.log_pdf(mode + u.scale(1e-3)).unwrap() <= at_mode
    });
    c.check(
        "mode is a local maximum",
        local,
        "100 directions at 1e-3".into(),
    );

    let c_ref = huber_variance_factor::<f64>();
    c.check(
        "projected variance factor",
        (c_ref - 3.076_473_678_389_8).abs() < 1e-14,
        format!("{c_ref}"),
    );
    c.finish("distribution")
}

fn random_raw(rng: &mut ChaCha8Rng, scale: f64) -> RawOutput<f64> {
    let mut w = [0.0; 7];
    for x in &mut w {
        *x = rng.random_range(-scale..scale);
    }
    RawOutput { w }
}

/// Raw outputs where the activation is affine in `w_B` and `a ≥ 1`.
pub fn random_convex_raw(rng: &mut ChaCha8Rng) -> RawOutput<f64> {
    let angle = std::f64::consts::PI * rng.random::<f64>();
    let (s, c) = angle.sin_cos();
    let rot = Mat2::new(c, -s, s, c);
    let wm =
        rot * Mat2::diag(rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)) * rot.transpose();
    RawOutput {
        w: [
            wm.m[0][0],
            (wm.m[0][1] + wm.m[1][0]) / 2.0,
            wm.m[1][1],
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(0.0..6.0),
            rng.random_range(-4.0..4.0),
        ],
    }
}

fn mapping_suite(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut c = Checks::new();
    let stats = crate::mapping::stats_from_ranges((3.0f64, 5.0), (1200.0, 2000.0)).unwrap();
    c.check(
        "paper dataset constants",
        (stats.mu_z0 - 2.5e-3).abs() < 1e-6 && (stats.d - 1.6667).abs() < 1e-3,
        format!("mu_z0 {:.6e}, D {:.5}", stats.mu_z0, stats.d),
    );

    let s_px = 1000.0;
    let mut bounds_ok = true;
    for _ in 0..cfg.samples.min(100_000) {
        let f: f64 = rng.random_range(1200.0..2000.0);
        let cam = CameraIntrinsics::new(f, s_px).unwrap();
        let z = rng.random_range(3.0..5.0);
        let half = z * s_px / (2.0 * f);
        let v = Point3::new(
            rng.random_range(-half..half),
            rng.random_range(-half..half),
            z,
        );
        let o = normalize_obs(v, &cam, &stats).unwrap();
        bounds_ok &= o.v_p.x.abs().max(o.v_p.y.abs()) <= 1.0 + 1e-12
            && o.z_p >= 1.0 / stats.d - 1e-12
            && o.z_p <= stats.d + 1e-12;
    }
    c.check(
        "normalized coordinates bounded",
        bounds_ok,
        "points uniform in the frustum".into(),
    );

    let mut total_ok = true;
    for i in 0..cfg.samples {
        let scale = if i % 2 == 0 { 1e3 } else { 5.0 };
        total_ok &= activation(&random_raw(rng, scale)).validate().is_ok();
    }
    c.check(
        "activation totality",
        total_ok,
        format!("{} random raw outputs", cfg.samples),
    );

    let grid: Vec<f64> = (-2000..=2000).map(|i| i as f64 * 0.005).collect();
    let a_vals: Vec<f64> = grid.iter().map(|&w| positive_map(w).0).collect();
    let monotone = a_vals.windows(2).all(|w| w[1] > w[0]);
    let jump = (positive_map(-1e-12f64).0 - positive_map(0.0f64).0).abs();
    c.check(
        "a(w1) continuous and increasing",
        monotone && jump < 1e-11 && positive_map(0.0).0 == 1.0,
        format!("jump at 0: {jump:.1e}"),
    );

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let cam = CameraIntrinsics::new(
            rng.random_range(800.0..2500.0),
            rng.random_range(500.0..1500.0),
        )
        .unwrap();
        let stats = DatasetStats::new(rng.random_range(1e-3..5e-3), 1.5).unwrap();
        let np = activation(&random_raw(rng, 1.5));
        let world = ProjectedHuber::new(normalized_to_world(&np, &cam, &stats).unwrap()).unwrap();
        let offset = world_loss_offset(&cam, &stats);
        let mode = world.mode();
        let v = Point3::new(
            mode.x + rng.random_range(-0.3..0.3) * mode.z,
            mode.y + rng.random_range(-0.3..0.3) * mode.z,
            mode.z * rng.random_range(0.5..2.0),
        );
        let obs = normalize_obs(v, &cam, &stats).unwrap();
        let (l, _) = crate::mapping::loss(&np, &obs).unwrap();
        let nll = -world.log_pdf(v).unwrap();
        worst = worst.max((nll - l - offset).abs());
    }
    c.check(
        "loss consistency between bases",
        worst < 1e-9,
        format!("max deviation {worst:.2e}"),
    );

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let raw = random_raw(rng, 1.5);
        let obs = NormalizedObservation::new(
            Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            rng.random_range(0.6..1.7),
        )
        .unwrap();
        let (_, g) = loss_from_raw(&raw, &obs).unwrap();
        for (i, gi) in g.iter().enumerate() {
            let h = 1e-6;
            let (mut p, mut m) = (raw, raw);
            p.w[i] += h;
            m.w[i] -= h;
            let fd = (loss_from_raw(&p, &obs).unwrap().0 - loss_from_raw(&m, &obs).unwrap().0)
                / (2.0 * h);
            worst = worst.max((gi - fd).abs() / fd.abs().max(1.0));
        }
    }
    c.check(
        "raw gradient vs finite differences",
        worst < 1e-5,
        format!("max rel {worst:.2e}"),
    );

    let d = stats.d;
    let (mut sup_lin, mut sup_other) = (0.0f64, 0.0f64);
    let mut lipschitz = 0.0f64;
    for _ in 0..cfg.samples.min(100_000) {
        let w1 = rng.random_range(-5.0..10.0);
        let w2 = rng.random_range(-10.0..10.0);
        let z_p = rng.random_range(1.0 / d..d);
        let (_, g): (f64, [f64; 2]) = depth_regression(w1, w2, z_p);
        let norm = g[0].hypot(g[1]);
        let nu = activation(&RawOutput {
            w: [0.0, 0.0, 0.0, 0.0, 0.0, w1, w2],
        })
        .nu_z;
        let linear = (w2 > 0.0 && nu / z_p > z_p / nu) || (w2 <= 0.0 && z_p / nu >= nu / z_p);
        if linear {
            sup_lin = sup_lin.max(norm);
        } else {
            sup_other = sup_other.max(norm);
        }
        let raw = random_raw(rng, 3.0);
        let obs = NormalizedObservation::new(
            Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            z_p,
        )
        .unwrap();
        let (_, g) = loss_from_raw(&raw, &obs).unwrap();
        lipschitz = lipschitz.max(g.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    c.check(
        "bounded depth gradients",
        sup_lin <= 2f64.sqrt() * d && sup_other <= 5f64.sqrt() * d,
        format!(
            "sup {sup_lin:.4} <= {:.4}, {sup_other:.4} <= {:.4}",
            2f64.sqrt() * d,
            5f64.sqrt() * d
        ),
    );
    c.check(
        "gradient sup over random raw outputs",
        lipschitz.is_finite(),
        format!("sup |grad_w| = {lipschitz:.3}"),
    );

    let random_obs = |rng: &mut ChaCha8Rng| {
        NormalizedObservation::new(
            Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            rng.random_range(1.0 / d..d),
        )
        .unwrap()
    };
    let midpoint_gap =
        |a: &RawOutput<f64>, b: &RawOutput<f64>, obs: &NormalizedObservation<f64>| {
            let mut mid = *a;
            for i in 0..7 {
                mid.w[i] = (a.w[i] + b.w[i]) / 2.0;
            }
            let f = |r: &RawOutput<f64>| loss_from_raw(r, obs).unwrap().0;
            f(&mid) - (f(a) + f(b)) / 2.0
        };

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cfg.chords {
        let obs = random_obs(rng);
        let a = random_convex_raw(rng);
        let mut b = random_convex_raw(rng);
        b.w[5] = a.w[5];
        b.w[6] = a.w[6];
        worst = worst.max(midpoint_gap(&a, &b, &obs));
    }
    c.check(
        "loss convex in (w_B, w_nu)",
        worst <= 1e-9,
        format!("{} chords, max violation {worst:.3e}", cfg.chords),
    );

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cfg.chords {
        let obs = random_obs(rng);
        let a = random_convex_raw(rng);
        let mut b = a;
        b.w[5] = rng.random_range(0.0..6.0);
        let w2 = rng.random_range(0.0..4.0);
        let (a, b) = (
            RawOutput {
                w: [a.w[0], a.w[1], a.w[2], a.w[3], a.w[4], a.w[5], w2],
            },
            RawOutput {
                w: [b.w[0], b.w[1], b.w[2], b.w[3], b.w[4], b.w[5], w2],
            },
        );
        worst = worst.max(midpoint_gap(&a, &b, &obs));
    }
    c.check(
        "loss convex in w1 >= 0 at fixed w2 >= 0",
        worst <= 1e-9,
        format!("{} chords, max violation {worst:.3e}", cfg.chords),
    );

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cfg.chords {
        let obs = random_obs(rng);
        worst = worst.max(midpoint_gap(
            &random_convex_raw(rng),
            &random_convex_raw(rng),
            &obs,
        ));
    }
    c.note(
        "full loss along unrestricted chords with w1 >= 0",
        format!("{} chords, max midpoint gap {worst:.3e}; log nu_z is concave in w2 on the nu_z > z_p side", cfg.chords),
    );

    let np = NormalizedParams::new(Vec2::new(0.0f64, 0.0), 1.0, Mat2::scaled_identity(2.0), 1.0)
        .unwrap();
    let (l, _) = crate::mapping::loss(
        &np,
        &NormalizedObservation::new(Vec2::new(0.0, 0.0), 1.0).unwrap(),
    )
    .unwrap();
    c.check(
        "loss at the optimum",
        (l - (-1.047_216_495_189_046)).abs() < 1e-12,
        format!("{l:.12}"),
    );
    c.finish("mapping")
}

/// A random 2–5 view problem around a random truth with moderate noise.
pub fn random_problem(rng: &mut ChaCha8Rng) -> (Vec<ViewEstimate<f64>>, Point3<f64>) {
    let truth = Point3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(0.0..1.5),
    );
    let cfg = ScenarioConfig {
        n_views: rng.random_range(2..=5),
        truth,
        rig_radius: rng.random_range(2.0..5.0),
        proj_jitter: 0.01,
        depth_jitter: 0.1,
        precision_range: (20.0, 200.0),
        a_range: (2.0, 12.0),
        seed: rng.random(),
        ..ScenarioConfig::default()
    };
    (simulate_rig(&cfg).unwrap(), truth)
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3<f64> {
    let axis = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    Mat3::from_axis_angle(axis.normalized(), rng.random_range(-3.0..3.0))
}

fn fusion_suite(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut c = Checks::new();

    let mut worst = f64::NEG_INFINITY;
    let per_problem = (cfg.chords / cfg.trials.max(1)).max(1);
    let mut worst_drop = f64::NEG_INFINITY;
    let mut all_converged = true;
    let mut pose_err = 0.0f64;
    for _ in 0..cfg.trials {
        let (views, truth) = random_problem(rng);
        let obj = FusionObjective::new(&views).unwrap();
        for _ in 0..per_problem {
            let jitter = |rng: &mut ChaCha8Rng| {
                truth
                    + Vec3::new(
                        rng.random_range(-0.5..0.5),
                        rng.random_range(-0.5..0.5),
                        rng.random_range(-0.5..0.5),
                    )
            };
            let (a, b) = (jitter(rng), jitter(rng));
            let (fa, fb) = (obj.value(a), obj.value(b));
            if fa.is_finite() && fb.is_finite() {
                worst = worst.max(obj.value((a + b).scale(0.5)) - (fa + fb) / 2.0);
            }
        }

        let res = fuse(&views, None).unwrap();
        all_converged &= res.converged;
        for _ in 0..1000 {
            let u = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalized();
            worst_drop = worst_drop.max(res.nll - obj.value(res.point + u.scale(1e-4)));
        }

        let r = random_rotation(rng);
        let t = Vec3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
        let moved: Vec<ViewEstimate<f64>> = views
            .iter()
            .map(|v| ViewEstimate {
                pose: v.pose.transformed(&r, t),
                ..*v
            })
            .collect();
        let init = r.mul_vec(res.point) + t;
        let res_moved = fuse(&moved, Some(init)).unwrap();
        pose_err = pose_err.max((res_moved.point - init).norm());
    }
    c.check(
        "fused objective convex",
        worst <= 1e-9,
        format!("max violation {worst:.3e}"),
    );
    c.check(
        "solver optimality",
        worst_drop <= 1e-8 && all_converged,
        format!(
            "{} problems, max decrease at 1e-4: {worst_drop:.2e}",
            cfg.trials
        ),
    );
    c.check(
        "pose invariance",
        pose_err < 1e-8,
        format!("max deviation {pose_err:.2e}"),
    );

    let target = Point3::new(0.0, 0.0, 0.0);
    let left = CameraPose::look_at(Point3::new(-1.0, -3.0, 0.5), target).unwrap();
    let p = DistParams::new(
        Vec2::new(0.01, -0.02),
        3.3,
        Mat2::symmetric(60.0, 10.0, 40.0),
        5.0,
    )
    .unwrap();
    let cam = CameraIntrinsics::new(1500.0, 1000.0).unwrap();
    let mirror = |pose: CameraPose<f64>| {
        let flip = Mat3::from_rows([[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        // Conjugating by the mirror keeps det R = +1 and flips camera x.
        let r = flip * pose.r * flip;
        CameraPose::new(r, flip.mul_vec(pose.t)).unwrap()
    };
    let mirrored = DistParams {
        mu: Vec2::new(-p.mu.x, p.mu.y),
        precision: Mat2::symmetric(60.0, -10.0, 40.0),
        ..p
    };
    let views = [
        ViewEstimate::new(left, cam, p).unwrap(),
        ViewEstimate::new(mirror(left), cam, mirrored).unwrap(),
    ];
    let res = fuse(&views, None).unwrap();
    c.check(
        "mirror-symmetric pair",
        res.point.x.abs() < 1e-6,
        format!("x = {:.2e}", res.point.x),
    );

    let (mut single, mut fused) = (Vec::new(), Vec::new());
    for _ in 0..200 {
        let cfg = ScenarioConfig {
            seed: rng.random(),
            ..ScenarioConfig::default()
        };
        let views = simulate_rig(&cfg).unwrap();
        single.push((views[0].world_mode() - cfg.truth).norm());
        fused.push((fuse(&views, None).unwrap().point - cfg.truth).norm());
    }
    let (ms, mf) = (median(&mut single), median(&mut fused));
    c.check(
        "fusion beats a single view",
        mf < ms,
        format!("median error 4 views {mf:.4} m, 1 view {ms:.4} m"),
    );
    c.finish("fusion")
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Pairs `(v, e)` with `e = v·χ²₁`, so that `E[e | v] = v`.
pub fn calibrated_pairs(n: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(0.1..2.0);
            let g: f64 = normal.sample(rng);
            (v, v * g * g)
        })
        .collect()
}

/// 99.9% quantile of [`calibration_deviation`] over all 9801 windows of 200
/// for 10⁴ exactly calibrated pairs, from 2000 simulated curves. A single
/// window exceeds 3 standard errors in about two thirds of such curves.
pub const WORST_WINDOW_LIMIT: f64 = 5.5;

/// Largest deviation of a calibration curve from the identity, in standard
/// errors of the window mean (`Var[v·χ²₁] = 2v²`).
pub fn calibration_deviation(points: &[(f64, f64)], window: usize) -> f64 {
    points
        .iter()
        .map(|&(v, e)| {
            let se = (2.0f64).sqrt() * v / (window as f64).sqrt();
            ((e - v) / se).abs()
        })
        .fold(0.0, f64::max)
}

fn harness_suite(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut c = Checks::new();

    let pairs = calibrated_pairs(10_000, rng);
    let curve = calibration_curve(&pairs, 200).unwrap();
    let dev = calibration_deviation(&curve.points, curve.window);
    let monotone = curve.points.windows(2).all(|w| w[0].0 <= w[1].0);
    c.check(
        "calibration tracks identity",
        dev < WORST_WINDOW_LIMIT && monotone,
        format!(
            "worst of {} windows {dev:.2} standard errors",
            curve.points.len()
        ),
    );
    let overconfident: Vec<(f64, f64)> = pairs.iter().map(|&(v, e)| (v, 1.5 * e)).collect();
    let off = calibration_curve(&overconfident, 200).unwrap();
    let off_dev = calibration_deviation(&off.points, off.window);
    c.check(
        "calibration flags 50% overconfidence",
        off_dev > WORST_WINDOW_LIMIT,
        format!("worst window {off_dev:.2} standard errors"),
    );

    let mut shuffled = pairs.clone();
    for i in (1..shuffled.len()).rev() {
        shuffled.swap(i, rng.random_range(0..=i));
    }
    c.check(
        "calibration permutation invariance",
        calibration_curve(&shuffled, 200).unwrap() == curve,
        "shuffled input".into(),
    );

    let scenario = ScenarioConfig::<f64> {
        seed: rng.random(),
        ..ScenarioConfig::default()
    };
    c.check(
        "simulation determinism",
        simulate_rig(&scenario).unwrap() == simulate_rig(&scenario).unwrap(),
        "same seed twice".into(),
    );

    let truth = NormalizedParams::new(Vec2::new(0.0f64, 0.0), 1.0, Mat2::scaled_identity(3.0), 5.0)
        .unwrap();
    let cam = CameraIntrinsics::new(1.0, 2.0).unwrap();
    let stats = DatasetStats::new(1.0, 1.0).unwrap();
    let world = ProjectedHuber::new(normalized_to_world(&truth, &cam, &stats).unwrap()).unwrap();
    let n = cfg.samples.min(50_000);
    let obs: Vec<_> = world
        .sample(n, rng.random())
        .into_iter()
        .map(|v| normalize_obs(v, &cam, &stats).unwrap())
        .collect();
    let fit = fit_params(&obs).unwrap();
    let np = fit.params;
    let b_err = (np.b - truth.b)
        .m
        .iter()
        .flatten()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
        / 3.0;
    c.check(
        "parameter recovery",
        (np.nu_z - 1.0).abs() < 0.02 && (np.a - 5.0).abs() < 0.75 && b_err < 0.1,
        format!(
            "{n} samples: nu_z {:.4}, a {:.3}, B rel err {b_err:.4}",
            np.nu_z, np.a
        ),
    );
    c.finish("harness")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite() {
        assert!(run_suites(&["nope".to_string()], &VerifyConfig::default()).is_err());
    }

    #[test]
    fn special_suite_passes() {
        let r = run_suites(&["special_fn".to_string()], &VerifyConfig::default()).unwrap();
        assert!(r[0].passed, "{:#?}", r[0]);
    }
}
