//! JSON shapes of the library types and the 17-digit number formatter.

use std::io;

use projhuber::harness::{FitResult, ScenarioConfig, SuiteReport};
use projhuber::{
    CameraIntrinsics, CameraPose, DatasetStats, DistParams, Error, Mat2, Mat3, Moments,
    NormalizedObservation, NormalizedParams, Plane, Point3, RawOutput, Vec2, ViewEstimate,
};
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

/// Compact JSON with every float written at 17 significant digits.
pub struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser).expect("serializing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn mat2(m: [[f64; 2]; 2]) -> Mat2<f64> {
    Mat2::from_rows(m)
}

fn rows2(m: &Mat2<f64>) -> [[f64; 2]; 2] {
    m.m
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistParamsJson {
    pub mu: [f64; 3],
    #[serde(rename = "A")]
    pub precision: [[f64; 2]; 2],
    pub a: f64,
}

impl DistParamsJson {
    pub fn to_params(&self) -> Result<DistParams<f64>, Error> {
        DistParams::new(
            Vec2::new(self.mu[0], self.mu[1]),
            self.mu[2],
            mat2(self.precision),
            self.a,
        )
    }
}

impl From<&DistParams<f64>> for DistParamsJson {
    fn from(p: &DistParams<f64>) -> Self {
        Self {
            mu: [p.mu.x, p.mu.y, p.mu_z],
            precision: rows2(&p.precision),
            a: p.a,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewJson {
    #[serde(rename = "R")]
    pub r: [[f64; 3]; 3],
    pub t: [f64; 3],
    pub f: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub params: DistParamsJson,
}

impl ViewJson {
    pub fn to_view(&self) -> Result<ViewEstimate<f64>, Error> {
        let pose = CameraPose::new(Mat3::from_rows(self.r), Point3::from_array(self.t))?;
        let intrinsics = CameraIntrinsics::new(self.f, self.s)?;
        ViewEstimate::new(pose, intrinsics, self.params.to_params()?)
    }
}

impl From<&ViewEstimate<f64>> for ViewJson {
    fn from(v: &ViewEstimate<f64>) -> Self {
        Self {
            r: v.pose.r.m,
            t: v.pose.t.to_array(),
            f: v.intrinsics.f,
            s: v.intrinsics.s,
            params: (&v.params).into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlaneJson {
    pub d: [f64; 3],
    pub c: f64,
}

impl PlaneJson {
    pub fn to_plane(&self) -> Result<Plane<f64>, Error> {
        Plane::new(Point3::from_array(self.d), self.c)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsJson {
    pub mu_z0: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl From<&DatasetStats<f64>> for StatsJson {
    fn from(s: &DatasetStats<f64>) -> Self {
        Self {
            mu_z0: s.mu_z0,
            d: s.d,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawJson {
    pub w: [f64; 7],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizedParamsJson {
    pub nu_p: [f64; 2],
    pub nu_z: f64,
    #[serde(rename = "B")]
    pub b: [[f64; 2]; 2],
    pub a: f64,
}

impl From<&NormalizedParams<f64>> for NormalizedParamsJson {
    fn from(p: &NormalizedParams<f64>) -> Self {
        Self {
            nu_p: p.nu_p.to_array(),
            nu_z: p.nu_z,
            b: rows2(&p.b),
            a: p.a,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationJson {
    pub v_p: [f64; 2],
    pub z_p: f64,
}

impl ObservationJson {
    pub fn to_observation(&self) -> Result<NormalizedObservation<f64>, Error> {
        NormalizedObservation::new(Vec2::new(self.v_p[0], self.v_p[1]), self.z_p)
    }
}

#[derive(Debug, Deserialize)]
pub struct EvalInput {
    pub params: DistParamsJson,
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Serialize)]
pub struct EvalOutput {
    /// `null` where the density is zero.
    pub log_pdf: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct PointsOutput {
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Serialize)]
pub struct MomentsOutput {
    pub mean_proj: [f64; 2],
    pub var_proj: [[f64; 2]; 2],
    pub mean_depth: f64,
    pub var_depth: f64,
}

impl From<&Moments<f64>> for MomentsOutput {
    fn from(m: &Moments<f64>) -> Self {
        Self {
            mean_proj: m.mean_proj.to_array(),
            var_proj: rows2(&m.var_proj),
            mean_depth: m.mean_depth,
            var_depth: m.var_depth,
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct StatsInput {
    /// `(z, f)` pairs.
    pub samples: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
pub struct FuseInput {
    pub views: Vec<ViewJson>,
    #[serde(default)]
    pub init: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
pub struct PlaneInput {
    pub views: Vec<ViewJson>,
    pub plane: PlaneJson,
}

#[derive(Debug, Serialize)]
pub struct FusionOutput {
    pub point: [f64; 3],
    pub nll: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Deserialize)]
pub struct FitInput {
    pub samples: Vec<ObservationJson>,
    #[serde(default)]
    pub init: Option<RawJson>,
}

#[derive(Debug, Serialize)]
pub struct FitOutput {
    pub raw: RawJson,
    pub params: NormalizedParamsJson,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub at_boundary: bool,
}

impl From<&FitResult<f64>> for FitOutput {
    fn from(r: &FitResult<f64>) -> Self {
        Self {
            raw: RawJson { w: r.raw.w },
            params: (&r.params).into(),
            loss: r.loss,
            iterations: r.iterations,
            converged: r.converged,
            at_boundary: r.at_boundary,
        }
    }
}

impl From<&RawJson> for RawOutput<f64> {
    fn from(r: &RawJson) -> Self {
        RawOutput { w: r.w }
    }
}

/// Scenario file; omitted fields take the library defaults.
#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioJson {
    pub n_views: usize,
    pub truth: [f64; 3],
    pub rig_radius: f64,
    pub proj_jitter: f64,
    pub depth_jitter: f64,
    pub precision_range: [f64; 2],
    pub a_range: [f64; 2],
    pub focal: f64,
    pub sensor: f64,
    pub seed: u64,
}

impl Default for ScenarioJson {
    fn default() -> Self {
        let c = ScenarioConfig::<f64>::default();
        Self {
            n_views: c.n_views,
            truth: c.truth.to_array(),
            rig_radius: c.rig_radius,
            proj_jitter: c.proj_jitter,
            depth_jitter: c.depth_jitter,
            precision_range: [c.precision_range.0, c.precision_range.1],
            a_range: [c.a_range.0, c.a_range.1],
            focal: c.focal,
            sensor: c.sensor,
            seed: c.seed,
        }
    }
}

impl From<&ScenarioJson> for ScenarioConfig<f64> {
    fn from(s: &ScenarioJson) -> Self {
        ScenarioConfig {
            n_views: s.n_views,
            truth: Point3::from_array(s.truth),
            rig_radius: s.rig_radius,
            proj_jitter: s.proj_jitter,
            depth_jitter: s.depth_jitter,
            precision_range: (s.precision_range[0], s.precision_range[1]),
            a_range: (s.a_range[0], s.a_range[1]),
            focal: s.focal,
            sensor: s.sensor,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimulateOutput {
    pub truth: [f64; 3],
    pub views: Vec<ViewJson>,
}

#[derive(Debug, Deserialize)]
pub struct CalibrateInput {
    /// `(predicted variance, squared error)` pairs.
    pub pairs: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize)]
pub struct CalibrateOutput {
    pub window: usize,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize)]
pub struct ReportJson {
    pub suite: String,
    pub passed: bool,
    pub details: Vec<String>,
}

impl From<&SuiteReport> for ReportJson {
    fn from(r: &SuiteReport) -> Self {
        Self {
            suite: r.suite.clone(),
            passed: r.passed,
            details: r.details.clone(),
        }
    }
}
