//! Forecasting: the pluggable predictor contract and the reference
//! constant-velocity extrapolator over the smoothed motion.
//!
//! The pipeline treats the prediction model as a black box consuming the
//! smoothed recent history, so a learned sequence model can be dropped in
//! behind [`Predictor`]. The built-in [`HoltPredictor`] extrapolates the
//! smoother's velocity level, which is a strong reference on
//! pedestrian-style motion where the most recent velocity dominates.
//! Forecast uncertainty is attached by the pipeline, not the model: the
//! variance at horizon `k` is always `k * sigma2`.

use crate::smoothing::{reconstruct_history, SmootherState};
use crate::types::{Frame, PipelineConfig, Point2, PredictedTrajectory};

/// A trajectory forecasting model.
///
/// Implementations must be pure: identical history, state and config must
/// yield an identical forecast, with exactly `t_pred` steps. The engine may
/// call a predictor concurrently across observations.
pub trait Predictor {
    /// Forecasts `cfg.t_pred` future positions from a smoothed history of
    /// at least `cfg.t_obs` points ending at `smoother.last_pos`.
    fn predict(
        &self,
        history: &[Point2],
        smoother: &SmootherState,
        cfg: &PipelineConfig,
    ) -> PredictedTrajectory;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict(
        &self,
        history: &[Point2],
        smoother: &SmootherState,
        cfg: &PipelineConfig,
    ) -> PredictedTrajectory {
        (**self).predict(history, smoother, cfg)
    }
}

/// Reference predictor: constant-rate extrapolation of the smoothed
/// velocity.
#[derive(Debug, Clone, Copy, Default)]
pub struct HoltPredictor;

impl Predictor for HoltPredictor {
    fn predict(
        &self,
        _history: &[Point2],
        smoother: &SmootherState,
        cfg: &PipelineConfig,
    ) -> PredictedTrajectory {
        holt_predict(smoother, cfg)
    }
}

/// Extrapolates the smoother state over the forecast horizon: the mean at
/// horizon `k` is `last_pos + k * level`, with variances following the
/// pipeline schedule `k * sigma2`.
///
/// The velocity trend shapes the smoothed level (it is part of the
/// recurrence) but is deliberately not compounded into the forecast:
/// summing `level + h * trend` grows the trend's noise quadratically with
/// the horizon, which on noisy tracks overwhelms everything the smoothing
/// gained. Recent smoothed velocity alone is the dominant predictor.
pub fn holt_predict(state: &SmootherState, cfg: &PipelineConfig) -> PredictedTrajectory {
    let mut means = Vec::with_capacity(cfg.t_pred);
    let mut pos = state.last_pos;
    for _ in 0..cfg.t_pred {
        pos = pos + state.level;
        means.push(pos);
    }
    PredictedTrajectory::from_means(state.last_frame, means, cfg.sigma2)
}

/// Forecasts from a source track's history at frame `frame`, when possible.
///
/// The history (gap-interpolated) must span at least `t_obs` points and end
/// exactly at `frame`; otherwise no forecast is produced. When possible,
/// the whole history is smoothed online and the predictor consumes the
/// reconstructed recent window.
pub fn predict_observation<P: Predictor>(
    track_history: &[(Frame, Point2)],
    frame: Frame,
    cfg: &PipelineConfig,
    predictor: &P,
) -> Option<PredictedTrajectory> {
    let upto = match track_history.iter().position(|&(f, _)| f > frame) {
        Some(i) => &track_history[..i],
        None => track_history,
    };
    let (&(first, _), &(last, _)) = match (upto.first(), upto.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return None,
    };
    if last != frame {
        return None;
    }
    // Span after gap interpolation, not the raw sample count.
    if (last - first + 1) < cfg.t_obs as u64 {
        return None;
    }
    let (history, state) = reconstruct_history(upto, cfg).ok()?;
    Some(predictor.predict(&history, &state, cfg))
}
