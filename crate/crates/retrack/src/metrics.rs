//! Tracking and forecasting evaluation.
//!
//! Tracking quality is scored per frame with a gated minimum-cost matching
//! between ground truth and hypothesis positions (keeping the previous
//! frame's pairing when still within the gate), accumulating false
//! positives, false negatives and identity switches into
//! `MOTA = 1 - (FP + FN + IDSW) / GT`, plus a globally matched identity F1
//! score. Forecasting quality is scored by matching observation windows
//! with a squared-displacement cost, thresholding at `tau`, and averaging
//! the displacement error of the forecasts of the matched subjects;
//! sweeping `tau` yields an error-over-recall curve.
//!
//! Displacement errors follow the squared convention by default
//! (`ade_squared`); the per-step Euclidean alternative is a config switch,
//! and reports state which convention produced them.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::association::{hungarian, CostMatrix};
use crate::prediction::{predict_observation, Predictor};
use crate::retracker::{FrameOutput, TrackRow};
use crate::types::{
    euclidean, Frame, PipelineConfig, Point2, PredictedTrajectory, TrackId, Trajectory,
};
use crate::{Error, Result};

/// Ground-truth subjects of one scene, keyed by subject id.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthScene {
    subjects: BTreeMap<TrackId, Trajectory>,
}

impl GroundTruthScene {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let mut subjects = BTreeMap::new();
        for t in trajectories {
            let id = t.id();
            if subjects.insert(id, t).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate ground-truth subject id {id}"
                )));
            }
        }
        Ok(Self { subjects })
    }

    pub fn subjects(&self) -> &BTreeMap<TrackId, Trajectory> {
        &self.subjects
    }

    /// Total number of subject-frame annotations.
    pub fn total_annotations(&self) -> usize {
        self.subjects.values().map(|t| t.len()).sum()
    }

    pub fn frame_range(&self) -> Option<(Frame, Frame)> {
        let lo = self.subjects.values().map(|t| t.start()).min()?;
        let hi = self.subjects.values().map(|t| t.end()).max()?;
        Some((lo, hi))
    }

    /// Subjects present at a frame, in id order.
    pub fn at_frame(&self, frame: Frame) -> Vec<(TrackId, Point2)> {
        self.subjects
            .iter()
            .filter_map(|(id, t)| t.point_at(frame).map(|p| (*id, p)))
            .collect()
    }
}

/// Multi-object tracking report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotReport {
    pub idf1: f64,
    pub mota: f64,
    pub idsw: usize,
    #[serde(rename = "fp")]
    pub false_positives: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
    #[serde(rename = "gt")]
    pub gt_annotations: usize,
}

/// One point of a forecast evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEval {
    pub tau: f64,
    pub recall: f64,
    /// Mean displacement error over matched subjects; absent when nothing
    /// matched (or no matched subject carried a forecast).
    pub ade: Option<f64>,
    pub matched: usize,
    /// Ground-truth subject-frames that were eligible for matching.
    pub eligible: usize,
    /// True when errors are squared displacements, false for per-step
    /// Euclidean distances.
    pub squared: bool,
}

/// Error-over-recall curve across association thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdeCurve {
    pub points: Vec<PredictionEval>,
}

/// Per-frame gated matching with continuity preference. Returns the
/// frame's `(gt, hyp)` assignment.
fn match_frame(
    gt_objs: &[(TrackId, Point2)],
    hyp_objs: &[(TrackId, Point2)],
    prev: &HashMap<TrackId, TrackId>,
    radius: f64,
) -> Vec<(TrackId, TrackId)> {
    let hyp_index: HashMap<TrackId, (usize, Point2)> = hyp_objs
        .iter()
        .enumerate()
        .map(|(i, &(id, p))| (id, (i, p)))
        .collect();

    let mut assigned: Vec<(TrackId, TrackId)> = Vec::new();
    let mut gt_done = vec![false; gt_objs.len()];
    let mut hyp_done = vec![false; hyp_objs.len()];

    // Keep last frame's pairs that are still valid.
    for (gi, &(gid, gpos)) in gt_objs.iter().enumerate() {
        if let Some(hid) = prev.get(&gid) {
            if let Some(&(hi, hpos)) = hyp_index.get(hid) {
                if !hyp_done[hi] && euclidean(gpos, hpos) <= radius {
                    assigned.push((gid, *hid));
                    gt_done[gi] = true;
                    hyp_done[hi] = true;
                }
            }
        }
    }

    // Minimum-distance assignment over the rest, gated at the radius.
    let free_gt: Vec<usize> = (0..gt_objs.len()).filter(|&i| !gt_done[i]).collect();
    let free_hyp: Vec<usize> = (0..hyp_objs.len()).filter(|&i| !hyp_done[i]).collect();
    let mut costs = CostMatrix::new(free_gt.len(), free_hyp.len());
    for (r, &gi) in free_gt.iter().enumerate() {
        for (c, &hi) in free_hyp.iter().enumerate() {
            let d = euclidean(gt_objs[gi].1, hyp_objs[hi].1);
            if d <= radius {
                costs.set(r, c, d);
            }
        }
    }
    for &(r, c) in &hungarian(&costs).matched {
        assigned.push((gt_objs[free_gt[r]].0, hyp_objs[free_hyp[c]].0));
    }
    assigned
}

/// Scores hypothesis outputs against ground truth with world-plane gating.
///
/// An identity switch is counted whenever a subject's matched hypothesis id
/// differs from the id it was matched to most recently, even across frames
/// where the subject went unmatched.
pub fn mot_evaluate(
    gt: &GroundTruthScene,
    hyp: &[FrameOutput],
    match_radius: f64,
) -> Result<MotReport> {
    if match_radius <= 0.0 || match_radius.is_nan() {
        return Err(Error::Eval("match_radius must be positive".into()));
    }
    let gt_total = gt.total_annotations();
    if gt_total == 0 {
        return Err(Error::Eval(
            "MOT metrics are undefined for empty ground truth".into(),
        ));
    }

    let hyp_by_frame: BTreeMap<Frame, Vec<(TrackId, Point2)>> = hyp
        .iter()
        .map(|out| {
            (
                out.frame,
                out.tracks.iter().map(|r| (r.id, r.pos)).collect(),
            )
        })
        .collect();

    let mut frames: BTreeSet<Frame> = hyp_by_frame.keys().copied().collect();
    if let Some((lo, hi)) = gt.frame_range() {
        frames.extend(lo..=hi);
    }

    let mut fp = 0usize;
    let mut fn_count = 0usize;
    let mut idsw = 0usize;
    let mut hyp_total = 0usize;
    let mut prev_frame: HashMap<TrackId, TrackId> = HashMap::new();
    let mut last_match: HashMap<TrackId, TrackId> = HashMap::new();
    let mut overlap: HashMap<(TrackId, TrackId), usize> = HashMap::new();

    let empty = Vec::new();
    for &frame in &frames {
        let gt_objs = gt.at_frame(frame);
        let hyp_objs = hyp_by_frame.get(&frame).unwrap_or(&empty);
        hyp_total += hyp_objs.len();

        for &(gid, gpos) in &gt_objs {
            for &(hid, hpos) in hyp_objs {
                if euclidean(gpos, hpos) <= match_radius {
                    *overlap.entry((gid, hid)).or_default() += 1;
                }
            }
        }

        let assigned = match_frame(&gt_objs, hyp_objs, &prev_frame, match_radius);
        fp += hyp_objs.len() - assigned.len();
        fn_count += gt_objs.len() - assigned.len();
        for &(gid, hid) in &assigned {
            if let Some(&prev_hid) = last_match.get(&gid) {
                if prev_hid != hid {
                    idsw += 1;
                }
            }
            last_match.insert(gid, hid);
        }
        prev_frame = assigned.into_iter().collect();
    }

    let mota = 1.0 - (fp + fn_count + idsw) as f64 / gt_total as f64;
    let idf1 = idf1_score(&overlap, gt_total, hyp_total);

    Ok(MotReport {
        idf1,
        mota,
        idsw,
        false_positives: fp,
        false_negatives: fn_count,
        gt_annotations: gt_total,
    })
}

/// Identity F1 from per-pair co-location counts: a global one-to-one
/// id matching maximizing total co-located frames, scored as
/// `2 * IDTP / (gt_total + hyp_total)`.
#[allow(clippy::needless_range_loop)] // i/j double as dummy-node indices
fn idf1_score(
    overlap: &HashMap<(TrackId, TrackId), usize>,
    gt_total: usize,
    hyp_total: usize,
) -> f64 {
    if gt_total + hyp_total == 0 {
        return 0.0;
    }
    let gt_ids: Vec<TrackId> = {
        let mut v: Vec<TrackId> = overlap.keys().map(|&(g, _)| g).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let hyp_ids: Vec<TrackId> = {
        let mut v: Vec<TrackId> = overlap.keys().map(|&(_, h)| h).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    if gt_ids.is_empty() || hyp_ids.is_empty() {
        return 0.0;
    }

    // Square matrix with dummy rows/columns so every id may stay unmatched;
    // minimizing (K - overlap) maximizes the total overlap.
    let (ng, nh) = (gt_ids.len(), hyp_ids.len());
    let n = ng + nh;
    let k = overlap.values().copied().max().unwrap_or(0) as f64 + 1.0;
    let mut costs = CostMatrix::new(n, n);
    for i in 0..n {
        for j in 0..n {
            let ov = if i < ng && j < nh {
                *overlap.get(&(gt_ids[i], hyp_ids[j])).unwrap_or(&0) as f64
            } else {
                0.0
            };
            costs.set(i, j, k - ov);
        }
    }
    let idtp: usize = hungarian(&costs)
        .matched
        .iter()
        .filter(|&&(i, j)| i < ng && j < nh)
        .map(|&(i, j)| *overlap.get(&(gt_ids[i], hyp_ids[j])).unwrap_or(&0))
        .sum();
    2.0 * idtp as f64 / (gt_total + hyp_total) as f64
}

/// Mean squared per-step displacement between two aligned observation
/// windows (no square root; the association threshold `tau` lives on this
/// scale, in square meters).
pub fn d_obs(gt_window: &[Point2], hyp_window: &[Point2]) -> Result<f64> {
    if gt_window.len() != hyp_window.len() || gt_window.is_empty() {
        return Err(Error::Eval(format!(
            "window length mismatch: {} vs {}",
            gt_window.len(),
            hyp_window.len()
        )));
    }
    let sum: f64 = gt_window
        .iter()
        .zip(hyp_window)
        .map(|(a, b)| {
            let d = *a - *b;
            d.x * d.x + d.y * d.y
        })
        .sum();
    Ok(sum / gt_window.len() as f64)
}

/// Mean per-step forecast displacement error between aligned future
/// windows: squared displacements when `squared`, per-step Euclidean
/// distances otherwise.
pub fn d_pred(gt_window: &[Point2], pred_window: &[Point2], squared: bool) -> Result<f64> {
    if gt_window.len() != pred_window.len() || gt_window.is_empty() {
        return Err(Error::Eval(format!(
            "window length mismatch: {} vs {}",
            gt_window.len(),
            pred_window.len()
        )));
    }
    let sum: f64 = gt_window
        .iter()
        .zip(pred_window)
        .map(|(a, b)| {
            let d = *a - *b;
            let sq = d.x * d.x + d.y * d.y;
            if squared {
                sq
            } else {
                sq.sqrt()
            }
        })
        .sum();
    Ok(sum / gt_window.len() as f64)
}

struct HypTrack<'a> {
    positions: BTreeMap<Frame, Point2>,
    predictions: BTreeMap<Frame, &'a PredictedTrajectory>,
}

fn index_hypothesis(hyp: &[FrameOutput]) -> BTreeMap<TrackId, HypTrack<'_>> {
    let mut tracks: BTreeMap<TrackId, HypTrack> = BTreeMap::new();
    for out in hyp {
        for row in &out.tracks {
            let entry = tracks.entry(row.id).or_insert_with(|| HypTrack {
                positions: BTreeMap::new(),
                predictions: BTreeMap::new(),
            });
            entry.positions.insert(out.frame, row.pos);
            if let Some(p) = &row.prediction {
                entry.predictions.insert(out.frame, p);
            }
        }
    }
    tracks
}

fn window_ending_at(
    positions: &BTreeMap<Frame, Point2>,
    end: Frame,
    len: usize,
) -> Option<Vec<Point2>> {
    if end + 1 < len as Frame {
        return None;
    }
    let start = end + 1 - len as Frame;
    let mut out = Vec::with_capacity(len);
    for f in start..=end {
        out.push(*positions.get(&f)?);
    }
    Some(out)
}

/// Evaluates forecasting at one association threshold.
///
/// At every frame where at least one subject has a full observed past and
/// forecast-length future inside its ground truth span, eligible subjects
/// are matched to hypothesis tracks (with complete observation windows) by
/// `d_obs` cost; pairs at or under `tau` form the matched set. Recall is
/// matched over eligible subject-frames; the displacement error averages
/// `d_pred` over matched pairs whose hypothesis carries a forecast.
pub fn prediction_evaluate(
    gt: &GroundTruthScene,
    hyp: &[FrameOutput],
    tau: f64,
    cfg: &PipelineConfig,
) -> PredictionEval {
    debug_assert!(tau >= 0.0, "association threshold must be non-negative");
    let hyp_tracks = index_hypothesis(hyp);
    let hyp_ids: Vec<TrackId> = hyp_tracks.keys().copied().collect();

    let mut eligible_total = 0usize;
    let mut matched = 0usize;
    let mut ade_sum = 0.0;
    let mut ade_n = 0usize;

    let Some((lo, hi)) = gt.frame_range() else {
        return PredictionEval {
            tau,
            recall: 0.0,
            ade: None,
            matched: 0,
            eligible: 0,
            squared: cfg.ade_squared,
        };
    };

    for t in lo..=hi {
        if t + 1 < cfg.t_obs as Frame {
            continue;
        }
        let eligible: Vec<(TrackId, &Trajectory)> = gt
            .subjects()
            .iter()
            .filter(|(_, traj)| {
                traj.start() + cfg.t_obs as Frame <= t + 1 && traj.end() >= t + cfg.t_pred as Frame
            })
            .map(|(id, traj)| (*id, traj))
            .collect();
        if eligible.is_empty() {
            continue;
        }
        eligible_total += eligible.len();

        let mut candidates: Vec<(TrackId, Vec<Point2>)> = Vec::new();
        for hid in &hyp_ids {
            if let Some(window) = window_ending_at(&hyp_tracks[hid].positions, t, cfg.t_obs) {
                candidates.push((*hid, window));
            }
        }
        if candidates.is_empty() {
            continue;
        }

        let mut costs = CostMatrix::new(eligible.len(), candidates.len());
        let gt_windows: Vec<Vec<Point2>> = eligible
            .iter()
            .map(|(_, traj)| {
                (t + 1 - cfg.t_obs as Frame..=t)
                    .map(|f| traj.point_at(f).expect("eligible window covered"))
                    .collect()
            })
            .collect();
        for (i, w) in gt_windows.iter().enumerate() {
            for (j, (_, hw)) in candidates.iter().enumerate() {
                costs.set(i, j, d_obs(w, hw).expect("equal window lengths"));
            }
        }

        for &(i, j) in &hungarian(&costs).matched {
            if costs.get(i, j) > tau {
                continue;
            }
            matched += 1;
            let (_, traj) = eligible[i];
            let (hid, _) = candidates[j];
            if let Some(pred) = hyp_tracks[&hid].predictions.get(&t) {
                let future: Option<Vec<Point2>> = (t + 1..=t + cfg.t_pred as Frame)
                    .map(|f| pred.mean_at(f))
                    .collect();
                if let Some(pred_window) = future {
                    let gt_future: Vec<Point2> = (t + 1..=t + cfg.t_pred as Frame)
                        .map(|f| traj.point_at(f).expect("eligible future covered"))
                        .collect();
                    ade_sum += d_pred(&gt_future, &pred_window, cfg.ade_squared)
                        .expect("equal window lengths");
                    ade_n += 1;
                }
            }
        }
    }

    PredictionEval {
        tau,
        recall: if eligible_total == 0 {
            0.0
        } else {
            matched as f64 / eligible_total as f64
        },
        ade: (ade_n > 0).then(|| ade_sum / ade_n as f64),
        matched,
        eligible: eligible_total,
        squared: cfg.ade_squared,
    }
}

/// Sweeps [`prediction_evaluate`] over ascending thresholds.
///
/// The per-frame assignment is threshold-independent (the threshold only
/// filters matched pairs), so recall is non-decreasing in `tau`; that
/// invariant is asserted on every call.
pub fn ade_over_recall(
    gt: &GroundTruthScene,
    hyp: &[FrameOutput],
    taus: &[f64],
    cfg: &PipelineConfig,
) -> AdeCurve {
    assert!(
        taus.windows(2).all(|w| w[0] <= w[1]),
        "thresholds must be sorted ascending"
    );
    let points: Vec<PredictionEval> = taus
        .iter()
        .map(|&tau| prediction_evaluate(gt, hyp, tau, cfg))
        .collect();
    assert!(
        points.windows(2).all(|w| w[0].recall <= w[1].recall),
        "recall must be non-decreasing in tau"
    );
    AdeCurve { points }
}

/// Converts raw trajectories into per-frame outputs without forecasts
/// (enough for MOT evaluation of a tracker's own output).
pub fn frame_outputs_from_trajectories(trajectories: &[Trajectory]) -> Vec<FrameOutput> {
    build_outputs(trajectories, |_, _| None)
}

/// Converts raw trajectories into per-frame outputs, forecasting from each
/// track's history at every covered frame (as the pipeline itself would).
pub fn frame_outputs_with_predictions<P: Predictor>(
    trajectories: &[Trajectory],
    cfg: &PipelineConfig,
    predictor: &P,
) -> Vec<FrameOutput> {
    build_outputs(trajectories, |traj, frame| {
        let points: Vec<(Frame, Point2)> = traj.iter().collect();
        predict_observation(&points, frame, cfg, predictor)
    })
}

fn build_outputs(
    trajectories: &[Trajectory],
    mut forecast: impl FnMut(&Trajectory, Frame) -> Option<PredictedTrajectory>,
) -> Vec<FrameOutput> {
    let mut by_frame: BTreeMap<Frame, Vec<TrackRow>> = BTreeMap::new();
    for traj in trajectories {
        for (frame, pos) in traj.iter() {
            by_frame.entry(frame).or_default().push(TrackRow {
                id: traj.id(),
                pos,
                prediction: forecast(traj, frame),
            });
        }
    }
    by_frame
        .into_iter()
        .map(|(frame, mut tracks)| {
            tracks.sort_by_key(|r| r.id);
            FrameOutput { frame, tracks }
        })
        .collect()
}
