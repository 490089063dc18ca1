//! Domain types shared by every other module: plane geometry, frame
//! indexing, trajectories, Gaussian forecasts, and the pipeline
//! configuration.
//!
//! All types here are immutable value types; they are `Copy` or cheaply
//! cloned and safe to move between threads.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Frame index on a uniform clock. All frame-rate resampling happens at
/// ingestion (stride subsampling), so the core never sees wall-clock time.
pub type Frame = u64;

/// Opaque track identifier. Never reused within a run; the simulator and
/// the re-tracker draw from disjoint ranges so provenance stays auditable.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct TrackId(pub u64);

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A ground-plane position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

/// A displacement in meters per step (also used for the velocity trend in
/// meters per step squared).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Sub for Point2 {
    type Output = Vec2;
    fn sub(self, rhs: Point2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Add<Vec2> for Point2 {
    type Output = Point2;
    fn add(self, rhs: Vec2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub<Vec2> for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Vec2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Euclidean distance between two plane points, in meters.
pub fn euclidean(a: Point2, b: Point2) -> f64 {
    (a - b).norm()
}

/// A tracked subject's positions over a contiguous frame range.
///
/// Points cover every frame from `start` to `end()` with no holes; gaps in
/// the underlying data are represented by splitting into several
/// trajectories at ingestion, never by missing entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    id: TrackId,
    start: Frame,
    points: Vec<Point2>,
}

impl Trajectory {
    pub fn new(id: TrackId, start: Frame, points: Vec<Point2>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput(format!(
                "trajectory {id} has no points"
            )));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "trajectory {id} has a non-finite point ({}, {})",
                p.x, p.y
            )));
        }
        Ok(Self { id, start, points })
    }

    pub fn id(&self) -> TrackId {
        self.id
    }

    pub fn start(&self) -> Frame {
        self.start
    }

    /// Last covered frame: `start + len - 1`.
    pub fn end(&self) -> Frame {
        self.start + self.points.len() as Frame - 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: points non-empty
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Position at an absolute frame, if covered.
    pub fn point_at(&self, frame: Frame) -> Option<Point2> {
        if frame < self.start || frame > self.end() {
            return None;
        }
        Some(self.points[(frame - self.start) as usize])
    }

    /// Iterates `(frame, position)` pairs in frame order.
    pub fn iter(&self) -> impl Iterator<Item = (Frame, Point2)> + '_ {
        self.points
            .iter()
            .enumerate()
            .map(move |(i, p)| (self.start + i as Frame, *p))
    }
}

/// One tracked location at one frame, stripped of identity for
/// re-association but keeping provenance to its source input track.
///
/// `prediction` is present when the source track had enough history at this
/// frame (`t_obs` or more points) to forecast from.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frame: Frame,
    pub pos: Point2,
    pub source_track: TrackId,
    pub prediction: Option<PredictedTrajectory>,
}

impl Observation {
    pub fn new(
        frame: Frame,
        pos: Point2,
        source_track: TrackId,
        prediction: Option<PredictedTrajectory>,
    ) -> Result<Self> {
        if !pos.is_finite() {
            return Err(Error::InvalidInput(format!(
                "observation at frame {frame} has non-finite position"
            )));
        }
        if let Some(p) = &prediction {
            if p.origin_frame() != frame {
                return Err(Error::InvalidInput(format!(
                    "observation at frame {frame} carries a prediction anchored at frame {}",
                    p.origin_frame()
                )));
            }
        }
        Ok(Self {
            frame,
            pos,
            source_track,
            prediction,
        })
    }
}

/// An isotropic Gaussian over the plane: mean position plus one per-axis
/// variance (covariance `var * I`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPoint {
    pub mean: Point2,
    pub var: f64,
}

/// A forecast of a subject's future positions.
///
/// `steps[k-1]` is the Gaussian for frame `origin_frame + k`, with variance
/// `k * sigma2`: uncertainty grows linearly with the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedTrajectory {
    origin_frame: Frame,
    steps: Vec<GaussianPoint>,
}

impl PredictedTrajectory {
    /// Builds a forecast from per-horizon means, attaching the linear
    /// variance schedule `k * sigma2`.
    pub fn from_means(origin_frame: Frame, means: Vec<Point2>, sigma2: f64) -> Self {
        let steps = means
            .into_iter()
            .enumerate()
            .map(|(i, mean)| GaussianPoint {
                mean,
                var: (i + 1) as f64 * sigma2,
            })
            .collect();
        Self {
            origin_frame,
            steps,
        }
    }

    pub fn origin_frame(&self) -> Frame {
        self.origin_frame
    }

    pub fn steps(&self) -> &[GaussianPoint] {
        &self.steps
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// First forecast frame (`origin + 1`), or None for an empty forecast.
    pub fn first_frame(&self) -> Option<Frame> {
        (!self.steps.is_empty()).then_some(self.origin_frame + 1)
    }

    /// Last forecast frame (`origin + horizon`).
    pub fn last_frame(&self) -> Option<Frame> {
        (!self.steps.is_empty()).then_some(self.origin_frame + self.steps.len() as Frame)
    }

    pub fn covers(&self, frame: Frame) -> bool {
        match (self.first_frame(), self.last_frame()) {
            (Some(a), Some(b)) => frame >= a && frame <= b,
            _ => false,
        }
    }

    /// Gaussian at an absolute frame, if covered.
    pub fn gaussian_at(&self, frame: Frame) -> Option<GaussianPoint> {
        if !self.covers(frame) {
            return None;
        }
        Some(self.steps[(frame - self.origin_frame - 1) as usize])
    }

    /// Forecast mean at an absolute frame, if covered.
    pub fn mean_at(&self, frame: Frame) -> Option<Point2> {
        self.gaussian_at(frame).map(|g| g.mean)
    }

    /// Forecast means in horizon order.
    pub fn means(&self) -> impl Iterator<Item = Point2> + '_ {
        self.steps.iter().map(|g| g.mean)
    }
}

/// All tunables of the pipeline.
///
/// Defaults: 4 observed steps, 12 predicted steps, smoothing constants
/// alpha = beta = 0.5, unit variance growth, association gate 3.0, max
/// track age 6 (half the prediction horizon), 3-hit probation, and
/// squared-error ADE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Observed history length consumed by the predictor, in steps.
    pub t_obs: usize,
    /// Forecast horizon, in steps.
    pub t_pred: usize,
    /// Level smoothing constant, in (0, 1].
    pub alpha: f64,
    /// Trend smoothing constant, in [0, 1].
    pub beta: f64,
    /// Per-step variance growth of a forecast, in square meters.
    pub sigma2: f64,
    /// Association gate on the prediction-space distance (unitless).
    pub d_min: f64,
    /// Frames a track may go unmatched before deletion.
    pub t_max: u64,
    /// Matched frames required before a track is confirmed and emitted.
    pub probation: u64,
    /// When true, displacement errors are mean squared errors; when false,
    /// per-step Euclidean distances are averaged instead.
    pub ade_squared: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let t_pred = 12;
        Self {
            t_obs: 4,
            t_pred,
            alpha: 0.5,
            beta: 0.5,
            sigma2: 1.0,
            d_min: 3.0,
            t_max: (t_pred / 2) as u64,
            probation: 3,
            ade_squared: true,
        }
    }
}

impl PipelineConfig {
    /// Positional gate used when one side of a candidate pair has no
    /// forecast to compare: `d_min * sqrt(sigma2)`, in meters.
    pub fn positional_gate(&self) -> f64 {
        self.d_min * self.sigma2.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        validate_config(self.clone()).map(|_| ())
    }
}

/// Checks every configuration invariant, returning the config unchanged on
/// success and naming the first violated invariant otherwise.
pub fn validate_config(cfg: PipelineConfig) -> Result<PipelineConfig> {
    if cfg.t_obs < 2 {
        return Err(Error::Config("t_obs ≥ 2".into()));
    }
    if cfg.t_pred < 1 {
        return Err(Error::Config("t_pred ≥ 1".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
        return Err(Error::Config("alpha ∈ (0,1]".into()));
    }
    if !(cfg.beta >= 0.0 && cfg.beta <= 1.0) {
        return Err(Error::Config("beta ∈ [0,1]".into()));
    }
    if !(cfg.sigma2 > 0.0 && cfg.sigma2.is_finite()) {
        return Err(Error::Config("sigma2 > 0".into()));
    }
    if !(cfg.d_min > 0.0 && cfg.d_min.is_finite()) {
        return Err(Error::Config("d_min > 0".into()));
    }
    if cfg.t_max < 1 {
        return Err(Error::Config("t_max ≥ 1".into()));
    }
    Ok(cfg)
}

/// Splits `(frame, position)` samples into contiguous runs (no frame
/// holes inside a run).
pub(crate) fn split_runs(samples: &[(Frame, Point2)]) -> Vec<Vec<(Frame, Point2)>> {
    let mut runs = Vec::new();
    let mut run: Vec<(Frame, Point2)> = Vec::new();
    for &(frame, pos) in samples {
        if let Some(&(last, _)) = run.last() {
            if frame != last + 1 {
                runs.push(std::mem::take(&mut run));
            }
        }
        run.push((frame, pos));
    }
    if !run.is_empty() {
        runs.push(run);
    }
    runs
}

/// Splits a sequence of `(frame, position)` samples into contiguous runs,
/// assigning fresh ids from `next_id`. Shared by ingestion and the
/// simulator, both of which must never emit trajectories with holes.
pub(crate) fn split_into_trajectories(
    samples: &[(Frame, Point2)],
    next_id: &mut u64,
) -> Vec<Trajectory> {
    split_runs(samples)
        .into_iter()
        .map(|run| {
            let start = run[0].0;
            let points = run.iter().map(|&(_, p)| p).collect();
            let id = TrackId(*next_id);
            *next_id += 1;
            Trajectory::new(id, start, points).expect("non-empty run")
        })
        .collect()
}

/// Returns the sorted set of frames covered by any of the trajectories.
pub fn covered_frames(trajectories: &[Trajectory]) -> BTreeSet<Frame> {
    trajectories
        .iter()
        .flat_map(|t| t.start()..=t.end())
        .collect()
}
