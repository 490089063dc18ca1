//! The re-tracking engine: rebuilds a track set from identity-stripped
//! observations by forecast similarity.
//!
//! Per-frame lifecycle:
//! 1. Assign observations to active tracks ([`crate::association::gate_and_match`]).
//! 2. Matched tracks: append the observation, interpolate any gap since the
//!    last match, re-smooth the whole observation sequence, regenerate the
//!    forecast, reset age, count the hit.
//! 3. Unmatched tracks: age by one, keep the stale forecast (staleness is
//!    bounded by `t_max` and the distance measure already discounts it).
//! 4. Unmatched observations: spawn a new track, adopting the observation's
//!    own forecast and seeding history from its source track's recent
//!    positions so the smoother starts with context.
//! 5. Prune tracks older than `t_max`, and unconfirmed tracks older than
//!    the probation length.
//! 6. Emit all confirmed tracks. An unmatched confirmed track is carried at
//!    its forecast position for the current frame, which is what lets a
//!    briefly missed subject survive a detection gap.
//!
//! Tracks are confirmed after `probation` consecutive matched frames.
//! Counting consecutive (not total) hits matters: oscillating clutter
//! revisits the same spots on alternate frames and would eventually
//! accumulate any total-hit threshold, but it cannot sustain a run of
//! consecutive matches. [`step`] streams only confirmed tracks; [`run`]
//! additionally backfills the pre-confirmation rows of tracks that do get
//! confirmed, so the assembled outputs cover a surviving track's whole
//! life while never-confirmed clutter stays suppressed everywhere.
//!
//! [`step`]: RetrackEngine::step

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::association::gate_and_match;
use crate::prediction::{predict_observation, Predictor};
use crate::smoothing::{reconstruct_history, smoother_init, SmootherState};
use crate::types::{
    Frame, Observation, PipelineConfig, Point2, PredictedTrajectory, TrackId, Trajectory, Vec2,
};
use crate::{Error, Result};

/// A re-tracker-owned track.
#[derive(Debug, Clone)]
pub struct ActiveTrack {
    id: TrackId,
    /// Accumulated `(frame, position)` observations, oldest first. Starts
    /// with up to `t_obs` positions inherited from the spawning
    /// observation's source track; frames before the spawn frame are
    /// context only and never emitted.
    observations: Vec<(Frame, Point2)>,
    smoother: SmootherState,
    prediction: Option<PredictedTrajectory>,
    /// Frames since the last match.
    age: u64,
    /// Total matched frames, counting the spawn.
    hits: u64,
    /// Consecutive matched frames ending now (resets when a frame is
    /// missed).
    streak: u64,
    confirmed: bool,
    spawn_frame: Frame,
    /// Matched rows awaiting confirmation, flushed as backfill.
    pending: Vec<(Frame, TrackRow)>,
}

impl ActiveTrack {
    pub fn id(&self) -> TrackId {
        self.id
    }

    pub fn observations(&self) -> &[(Frame, Point2)] {
        &self.observations
    }

    pub fn smoother(&self) -> &SmootherState {
        &self.smoother
    }

    pub fn prediction(&self) -> Option<&PredictedTrajectory> {
        self.prediction.as_ref()
    }

    pub fn age(&self) -> u64 {
        self.age
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn streak(&self) -> u64 {
        self.streak
    }

    pub fn confirmed(&self) -> bool {
        self.confirmed
    }

    pub fn spawn_frame(&self) -> Frame {
        self.spawn_frame
    }

    /// Position of the newest accumulated observation.
    pub fn last_pos(&self) -> Point2 {
        self.observations.last().expect("tracks are never empty").1
    }

    /// Frame of the newest accumulated observation.
    pub fn last_obs_frame(&self) -> Frame {
        self.observations.last().expect("tracks are never empty").0
    }

    #[cfg(test)]
    pub(crate) fn for_tests(
        id: TrackId,
        observations: Vec<(Frame, Point2)>,
        prediction: Option<PredictedTrajectory>,
    ) -> Self {
        let &(frame, pos) = observations.last().expect("test track needs observations");
        ActiveTrack {
            id,
            observations,
            smoother: smoother_init(Vec2::ZERO, frame, pos),
            prediction,
            age: 0,
            hits: 1,
            streak: 1,
            confirmed: false,
            spawn_frame: frame,
            pending: Vec::new(),
        }
    }
}

/// One emitted track state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRow {
    pub id: TrackId,
    pub pos: Point2,
    pub prediction: Option<PredictedTrajectory>,
}

/// All confirmed tracks at one frame, sorted by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameOutput {
    pub frame: Frame,
    pub tracks: Vec<TrackRow>,
}

/// Streaming re-tracker over per-frame observation sets.
#[derive(Debug)]
pub struct RetrackEngine<P> {
    cfg: PipelineConfig,
    predictor: P,
    tracks: Vec<ActiveTrack>,
    next_id: u64,
    last_frame: Option<Frame>,
    /// Recent positions per source track id, for seeding spawned tracks.
    source_history: HashMap<TrackId, VecDeque<(Frame, Point2)>>,
    backfill: Vec<(Frame, TrackRow)>,
}

impl<P: Predictor> RetrackEngine<P> {
    pub fn new(cfg: PipelineConfig, predictor: P) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            predictor,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
            source_history: HashMap::new(),
            backfill: Vec::new(),
        })
    }

    /// Makes the engine allocate ids starting at `base`, keeping its id
    /// namespace disjoint from the input's.
    pub fn with_id_base(mut self, base: u64) -> Self {
        self.next_id = base;
        self
    }

    pub fn active_tracks(&self) -> &[ActiveTrack] {
        &self.tracks
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Rows of tracks confirmed since the last call, belonging to frames
    /// already stepped past.
    pub fn take_backfill(&mut self) -> Vec<(Frame, TrackRow)> {
        std::mem::take(&mut self.backfill)
    }

    /// Advances the engine by one frame.
    ///
    /// `observations` must all carry `frame`, and frames must be strictly
    /// increasing across calls; an empty slice is a valid frame in which
    /// every track simply ages.
    pub fn step(&mut self, frame: Frame, observations: &[Observation]) -> Result<FrameOutput> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::InvalidInput(format!(
                    "frame {frame} is not after frame {last}"
                )));
            }
        }
        for obs in observations {
            if obs.frame != frame {
                return Err(Error::InvalidInput(format!(
                    "observation at frame {} in step for frame {frame}",
                    obs.frame
                )));
            }
        }

        for obs in observations {
            let history = self.source_history.entry(obs.source_track).or_default();
            history.push_back((frame, obs.pos));
            while history.len() > self.cfg.t_obs {
                history.pop_front();
            }
        }

        let assignment = gate_and_match(&self.tracks, observations, &self.cfg);

        for &(ti, oi) in &assignment.matched {
            let obs = &observations[oi];
            let track = &mut self.tracks[ti];
            // age == 0 here means the track also matched the previous
            // frame, so the run of consecutive hits continues.
            track.streak = if track.age == 0 { track.streak + 1 } else { 1 };
            track.observations.push((frame, obs.pos));
            track.age = 0;
            track.hits += 1;
            refresh_model(track, &self.predictor, &self.cfg)?;
            let row = TrackRow {
                id: track.id,
                pos: obs.pos,
                prediction: track.prediction.clone(),
            };
            if !track.confirmed && track.streak >= self.cfg.probation {
                track.confirmed = true;
                self.backfill.append(&mut track.pending);
            }
            track.pending.push((frame, row));
        }

        for &ti in &assignment.unmatched_tracks {
            self.tracks[ti].age += 1;
        }

        for &oi in &assignment.unmatched_observations {
            let obs = &observations[oi];
            let track = self.spawn(obs)?;
            self.tracks.push(track);
        }

        let (cfg_t_max, cfg_probation) = (self.cfg.t_max, self.cfg.probation);
        self.tracks
            .retain(|t| t.age <= cfg_t_max && (t.confirmed || t.age <= cfg_probation));

        let mut rows = Vec::new();
        for track in &mut self.tracks {
            if !track.confirmed {
                continue;
            }
            if track.age == 0 {
                // The matched row was staged in `pending`; emit it now.
                if let Some((f, row)) = track.pending.pop() {
                    debug_assert_eq!(f, frame);
                    rows.push(row);
                }
            } else {
                // Carry an unmatched track at its forecast position.
                let pos = track
                    .prediction
                    .as_ref()
                    .and_then(|p| p.mean_at(frame))
                    .unwrap_or_else(|| track.last_pos());
                rows.push(TrackRow {
                    id: track.id,
                    pos,
                    prediction: track.prediction.clone(),
                });
            }
        }
        rows.sort_by_key(|r| r.id);

        self.last_frame = Some(frame);
        Ok(FrameOutput {
            frame,
            tracks: rows,
        })
    }

    fn spawn(&mut self, obs: &Observation) -> Result<ActiveTrack> {
        let seeded: Vec<(Frame, Point2)> = self
            .source_history
            .get(&obs.source_track)
            .map(|h| h.iter().copied().collect())
            .unwrap_or_else(|| vec![(obs.frame, obs.pos)]);
        debug_assert_eq!(seeded.last(), Some(&(obs.frame, obs.pos)));
        let smoother = if seeded.len() >= 2 {
            reconstruct_history(&seeded, &self.cfg)?.1
        } else {
            smoother_init(Vec2::ZERO, obs.frame, obs.pos)
        };
        let id = TrackId(self.next_id);
        self.next_id += 1;
        let confirmed = 1 >= self.cfg.probation;
        let row = TrackRow {
            id,
            pos: obs.pos,
            prediction: obs.prediction.clone(),
        };
        Ok(ActiveTrack {
            id,
            observations: seeded,
            smoother,
            prediction: obs.prediction.clone(),
            age: 0,
            hits: 1,
            streak: 1,
            confirmed,
            spawn_frame: obs.frame,
            pending: vec![(obs.frame, row)],
        })
    }
}

/// Re-runs smoothing over a track's own observation sequence and
/// regenerates its forecast when the (gap-filled) history is long enough.
fn refresh_model<P: Predictor>(
    track: &mut ActiveTrack,
    predictor: &P,
    cfg: &PipelineConfig,
) -> Result<()> {
    if track.observations.len() < 2 {
        return Ok(());
    }
    let (history, state) = reconstruct_history(&track.observations, cfg)?;
    track.smoother = state;
    let span = track.last_obs_frame() - track.observations[0].0 + 1;
    track.prediction = if span >= cfg.t_obs as u64 {
        Some(predictor.predict(&history, &state, cfg))
    } else {
        None
    };
    Ok(())
}

/// Runs the whole pipeline over a tracker's output trajectories.
///
/// Every tracked location becomes an identity-free observation carrying a
/// forecast from its source track's history whenever that history is long
/// enough. The engine then consumes the per-frame observation sets in
/// order. Emitted track ids start above the largest input id. Rows of
/// tracks that were confirmed later are backfilled, so returned outputs
/// cover confirmed tracks from their spawn frame onward.
pub fn run<P: Predictor>(
    trajectories: &[Trajectory],
    cfg: &PipelineConfig,
    predictor: &P,
) -> Result<Vec<FrameOutput>> {
    cfg.validate()?;
    let mut sorted: Vec<&Trajectory> = trajectories.iter().collect();
    sorted.sort_by_key(|t| (t.id(), t.start()));

    let mut by_frame: BTreeMap<Frame, Vec<Observation>> = BTreeMap::new();
    for traj in &sorted {
        let points: Vec<(Frame, Point2)> = traj.iter().collect();
        for (i, &(frame, pos)) in points.iter().enumerate() {
            let prediction = predict_observation(&points[..=i], frame, cfg, predictor);
            by_frame.entry(frame).or_default().push(Observation::new(
                frame,
                pos,
                traj.id(),
                prediction,
            )?);
        }
    }

    let (first, last) = match (by_frame.keys().next(), by_frame.keys().next_back()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Ok(Vec::new()),
    };
    let id_base = trajectories.iter().map(|t| t.id().0).max().unwrap_or(0) + 1;
    let mut engine = RetrackEngine::new(cfg.clone(), predictor)?.with_id_base(id_base);

    let empty = Vec::new();
    let mut outputs = Vec::with_capacity((last - first + 1) as usize);
    for frame in first..=last {
        let observations = by_frame.get(&frame).unwrap_or(&empty);
        outputs.push(engine.step(frame, observations)?);
        for (f, row) in engine.take_backfill() {
            outputs[(f - first) as usize].tracks.push(row);
        }
    }
    for out in &mut outputs {
        out.tracks.sort_by_key(|r| r.id);
    }
    Ok(outputs)
}
