//! Online double exponential (Holt-Winters) smoothing of instantaneous
//! velocities, linear gap interpolation, and smoothed-history
//! reconstruction.
//!
//! The filter runs on the per-step displacements of a track, not the
//! positions: the most recent relative motion dominates a subject's future
//! movement, so damping its noise stabilizes downstream forecasts. Each
//! axis is smoothed independently with scalar constants:
//!
//! ```text
//! level_t = alpha * delta_t + (1 - alpha) * (level_{t-1} + trend_{t-1})
//! trend_t = beta * (level_t - level_{t-1}) + (1 - beta) * trend_{t-1}
//! ```
//!
//! The smoothed history is rebuilt backward from the newest observation, so
//! the subject's current estimated location is never altered; correction
//! drift is pushed into the stale past.

use crate::types::{Frame, PipelineConfig, Point2, Vec2};
use crate::{Error, Result};

/// Running state of the velocity smoother for one track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherState {
    /// Smoothed velocity, meters/step.
    pub level: Vec2,
    /// Velocity trend, meters/step².
    pub trend: Vec2,
    /// Frame of the newest consumed observation.
    pub last_frame: Frame,
    /// Position of the newest consumed observation.
    pub last_pos: Point2,
}

impl SmootherState {
    pub fn is_finite(&self) -> bool {
        self.level.is_finite() && self.trend.is_finite() && self.last_pos.is_finite()
    }
}

/// Seeds the smoother from the first observed displacement.
///
/// Level starts at the displacement itself and trend at zero, which is
/// unbiased for constant-velocity starts. `frame`/`pos` identify the
/// observation that produced the displacement (its endpoint).
pub fn smoother_init(first_delta: Vec2, frame: Frame, pos: Point2) -> SmootherState {
    SmootherState {
        level: first_delta,
        trend: Vec2::ZERO,
        last_frame: frame,
        last_pos: pos,
    }
}

/// Consumes one more raw displacement and returns the advanced state.
///
/// The anchor moves with the raw data: `last_pos` advances by `delta` and
/// `last_frame` by one step, so the state always ends at the latest
/// observed position.
pub fn smoother_update(
    state: &SmootherState,
    delta: Vec2,
    alpha: f64,
    beta: f64,
) -> Result<SmootherState> {
    if !delta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite velocity sample ({}, {})",
            delta.x, delta.y
        )));
    }
    let level = delta * alpha + (state.level + state.trend) * (1.0 - alpha);
    let trend = (level - state.level) * beta + state.trend * (1.0 - beta);
    Ok(SmootherState {
        level,
        trend,
        last_frame: state.last_frame + 1,
        last_pos: state.last_pos + delta,
    })
}

/// Fills every missing frame between consecutive anchors by linear
/// interpolation. Anchor points are returned unchanged.
pub fn interpolate_gap(track_points: &[(Frame, Point2)]) -> Result<Vec<(Frame, Point2)>> {
    if track_points.len() < 2 {
        return Err(Error::InvalidInput(
            "interpolation needs at least 2 points".into(),
        ));
    }
    for w in track_points.windows(2) {
        if w[1].0 == w[0].0 {
            return Err(Error::InvalidInput(format!(
                "duplicate frame {} in track",
                w[0].0
            )));
        }
        if w[1].0 < w[0].0 {
            return Err(Error::InvalidInput(format!(
                "frames not strictly increasing at {}",
                w[1].0
            )));
        }
    }
    let first = track_points[0].0;
    let last = track_points[track_points.len() - 1].0;
    let mut out = Vec::with_capacity((last - first + 1) as usize);
    for w in track_points.windows(2) {
        let (f1, p1) = w[0];
        let (f2, p2) = w[1];
        out.push((f1, p1));
        let span = (f2 - f1) as f64;
        for f in (f1 + 1)..f2 {
            let t = (f - f1) as f64 / span;
            out.push((f, p1 + (p2 - p1) * t));
        }
    }
    out.push(track_points[track_points.len() - 1]);
    Ok(out)
}

/// Smooths a track's observations and rebuilds its recent history.
///
/// Gaps are interpolated on positions first, then the displacement sequence
/// is run through the smoother. Positions are reconstructed backward from
/// the newest observation by subtracting smoothed displacements, so the
/// final reconstructed position always equals the latest observed one.
/// Returns the last `t_obs` reconstructed positions (all of them when the
/// track is shorter) and the final smoother state.
pub fn reconstruct_history(
    observations: &[(Frame, Point2)],
    cfg: &PipelineConfig,
) -> Result<(Vec<Point2>, SmootherState)> {
    if observations.len() < 2 {
        return Err(Error::InvalidInput(
            "history reconstruction needs at least 2 observations".into(),
        ));
    }
    let filled = interpolate_gap(observations)?;
    let deltas: Vec<Vec2> = filled.windows(2).map(|w| w[1].1 - w[0].1).collect();

    let mut state = smoother_init(deltas[0], filled[1].0, filled[1].1);
    let mut levels = Vec::with_capacity(deltas.len());
    levels.push(state.level);
    for &d in &deltas[1..] {
        state = smoother_update(&state, d, cfg.alpha, cfg.beta)?;
        levels.push(state.level);
    }
    // The state anchors exactly at the newest observation; accumulating
    // deltas would only reproduce it up to rounding.
    state.last_pos = filled[filled.len() - 1].1;
    debug_assert_eq!(state.last_frame, filled[filled.len() - 1].0);

    // Backward pass: anchor at the newest observation, walk smoothed
    // displacements toward the past.
    let n = filled.len();
    let mut positions = vec![Point2::default(); n];
    positions[n - 1] = filled[n - 1].1;
    for i in (0..n - 1).rev() {
        positions[i] = positions[i + 1] - levels[i];
    }

    let keep = n.min(cfg.t_obs);
    Ok((positions[n - keep..].to_vec(), state))
}
