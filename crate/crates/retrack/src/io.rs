//! File ingestion and emission: track files, homographies, flat key=value
//! configs, and report formatting.
//!
//! Track files are plain comma-separated text with a `frame,track_id,x,y`
//! header and six-decimal coordinates, so a write-then-load round trip is
//! stable to 1e-6 meters. Loading groups rows by track id and splits at
//! frame gaps; an optional row-major 3x3 homography maps input coordinates
//! to the world plane, and an optional stride subsamples frames
//! (`frame % s == 0`, renumbered to `frame / s`) to move between tracking
//! and prediction frame rates.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::metrics::{AdeCurve, MotReport, PredictionEval};
use crate::retracker::FrameOutput;
use crate::simulator::ScenarioSpec;
use crate::types::{Frame, PipelineConfig, Point2, TrackId, Trajectory};
use crate::{Error, Result};

pub const TRACK_FILE_HEADER: &str = "frame,track_id,x,y";
pub const PREDICTION_FILE_HEADER: &str = "frame,track_id,horizon,x,y,var";
pub const CURVE_FILE_HEADER: &str = "tau,recall,ade,matched";

/// Row-major 3x3 planar homography.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    h: [f64; 9],
}

impl Homography {
    pub const IDENTITY: Homography = Homography {
        h: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
    };

    /// Builds a homography, rejecting singular matrices
    /// (|det| <= 1e-12) and non-finite entries.
    pub fn new(h: [f64; 9]) -> Result<Self> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "homography has non-finite entries".into(),
            ));
        }
        let det = h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6])
            + h[2] * (h[3] * h[7] - h[4] * h[6]);
        if det.abs() <= 1e-12 {
            return Err(Error::InvalidInput(format!(
                "homography is not invertible (det = {det:e})"
            )));
        }
        Ok(Self { h })
    }

    /// Reads nine whitespace- or comma-separated numbers (row major).
    /// Lines starting with `#` are comments.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let values: Vec<f64> = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .flat_map(|l| l.split([',', ' ', '\t']))
            .filter(|tok| !tok.trim().is_empty())
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: 0,
                    msg: format!("bad homography entry {tok:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != 9 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 0,
                msg: format!("expected 9 homography entries, found {}", values.len()),
            });
        }
        let mut h = [0.0; 9];
        h.copy_from_slice(&values);
        Self::new(h)
    }

    /// Maps a point through the homography, dividing by the homogeneous
    /// coordinate.
    pub fn apply(&self, p: Point2) -> Result<Point2> {
        let h = &self.h;
        let w = h[6] * p.x + h[7] * p.y + h[8];
        if w.abs() < 1e-12 {
            return Err(Error::InvalidInput(format!(
                "homography sends ({}, {}) to infinity",
                p.x, p.y
            )));
        }
        Ok(Point2::new(
            (h[0] * p.x + h[1] * p.y + h[2]) / w,
            (h[3] * p.x + h[4] * p.y + h[5]) / w,
        ))
    }
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Loads a track file into trajectories.
///
/// Rows are grouped by track id and split at frame gaps; the first segment
/// of a track keeps its file id, later segments get fresh ids above the
/// file's maximum. The homography (if any) is applied per row before
/// grouping; the stride (if any) keeps frames divisible by it and
/// renumbers.
pub fn load_tracks(
    path: impl AsRef<Path>,
    homography: Option<&Homography>,
    stride: Option<u64>,
) -> Result<Vec<Trajectory>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    if let Some(s) = stride {
        if s == 0 {
            return Err(Error::Config("stride ≥ 1".into()));
        }
    }

    let mut rows: Vec<(Frame, u64, Point2)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if idx == 0 && trimmed.eq_ignore_ascii_case(TRACK_FILE_HEADER) {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_error(
                path,
                lineno,
                format!("expected 4 columns, found {}", fields.len()),
            ));
        }
        let frame: Frame = fields[0]
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad frame {:?}", fields[0])))?;
        let track_id: u64 = fields[1]
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad track_id {:?}", fields[1])))?;
        let x: f64 = fields[2]
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad x {:?}", fields[2])))?;
        let y: f64 = fields[3]
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad y {:?}", fields[3])))?;
        let mut p = Point2::new(x, y);
        if !p.is_finite() {
            return Err(parse_error(path, lineno, "non-finite coordinates"));
        }
        if let Some(s) = stride {
            if !frame.is_multiple_of(s) {
                continue;
            }
            if let Some(h) = homography {
                p = h.apply(p)?;
            }
            rows.push((frame / s, track_id, p));
        } else {
            if let Some(h) = homography {
                p = h.apply(p)?;
            }
            rows.push((frame, track_id, p));
        }
    }

    let mut by_id: BTreeMap<u64, Vec<(Frame, Point2)>> = BTreeMap::new();
    for (frame, id, p) in rows {
        by_id.entry(id).or_default().push((frame, p));
    }
    let mut next_fresh = by_id.keys().max().map_or(1, |m| m + 1);
    let mut out = Vec::new();
    for (id, mut samples) in by_id {
        samples.sort_by_key(|&(f, _)| f);
        for w in samples.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(parse_error(
                    path,
                    0,
                    format!("duplicate (frame, track_id) = ({}, {id})", w[0].0),
                ));
            }
        }
        // The leading segment keeps the file id; continuation fragments get
        // fresh ids above the file's maximum.
        for (i, run) in crate::types::split_runs(&samples).into_iter().enumerate() {
            let seg_id = if i == 0 {
                TrackId(id)
            } else {
                let fresh = TrackId(next_fresh);
                next_fresh += 1;
                fresh
            };
            let start = run[0].0;
            out.push(Trajectory::new(
                seg_id,
                start,
                run.into_iter().map(|(_, p)| p).collect(),
            )?);
        }
    }
    Ok(out)
}

fn format_row(out: &mut String, frame: Frame, id: TrackId, p: Point2) {
    writeln!(out, "{frame},{id},{:.6},{:.6}", p.x, p.y).expect("string write");
}

/// Writes trajectories as a track file (rows ordered by id, then frame).
pub fn save_tracks(path: impl AsRef<Path>, trajectories: &[Trajectory]) -> Result<()> {
    let mut sorted: Vec<&Trajectory> = trajectories.iter().collect();
    sorted.sort_by_key(|t| (t.id(), t.start()));
    let mut out = String::from(TRACK_FILE_HEADER);
    out.push('\n');
    for traj in sorted {
        for (frame, p) in traj.iter() {
            format_row(&mut out, frame, traj.id(), p);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes per-frame outputs as a track file (rows ordered by frame, then id).
pub fn save_frame_outputs(path: impl AsRef<Path>, outputs: &[FrameOutput]) -> Result<()> {
    let mut out = String::from(TRACK_FILE_HEADER);
    out.push('\n');
    for fo in outputs {
        for row in &fo.tracks {
            format_row(&mut out, fo.frame, row.id, row.pos);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes the forecasts attached to per-frame outputs:
/// `frame,track_id,horizon,x,y,var` with horizon counted from 1.
pub fn save_predictions(path: impl AsRef<Path>, outputs: &[FrameOutput]) -> Result<()> {
    let mut out = String::from(PREDICTION_FILE_HEADER);
    out.push('\n');
    for fo in outputs {
        for row in &fo.tracks {
            let Some(pred) = &row.prediction else {
                continue;
            };
            for (k, g) in pred.steps().iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{:.6},{:.6},{:.6}",
                    fo.frame,
                    row.id,
                    k + 1,
                    g.mean.x,
                    g.mean.y,
                    g.var
                )
                .expect("string write");
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn kv_pairs(path: &Path, text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(parse_error(
                path,
                lineno,
                format!("expected key=value, found {trimmed:?}"),
            ));
        };
        pairs.push((lineno, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_value<T: std::str::FromStr>(
    path: &Path,
    lineno: usize,
    key: &str,
    value: &str,
) -> Result<T> {
    value
        .parse()
        .map_err(|_| parse_error(path, lineno, format!("bad value for {key}: {value:?}")))
}

/// Parses a pipeline config from flat `key=value` text. Keys mirror the
/// config fields exactly; omitted keys keep their defaults, except `t_max`
/// which defaults to half of the configured forecast horizon.
pub fn parse_config(path: &Path, text: &str) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    let mut t_max_set = false;
    for (lineno, key, value) in kv_pairs(path, text)? {
        match key.as_str() {
            "t_obs" => cfg.t_obs = parse_value(path, lineno, &key, &value)?,
            "t_pred" => cfg.t_pred = parse_value(path, lineno, &key, &value)?,
            "alpha" => cfg.alpha = parse_value(path, lineno, &key, &value)?,
            "beta" => cfg.beta = parse_value(path, lineno, &key, &value)?,
            "sigma2" => cfg.sigma2 = parse_value(path, lineno, &key, &value)?,
            "d_min" => cfg.d_min = parse_value(path, lineno, &key, &value)?,
            "t_max" => {
                cfg.t_max = parse_value(path, lineno, &key, &value)?;
                t_max_set = true;
            }
            "probation" => cfg.probation = parse_value(path, lineno, &key, &value)?,
            "ade_squared" => cfg.ade_squared = parse_value(path, lineno, &key, &value)?,
            other => {
                return Err(parse_error(
                    path,
                    lineno,
                    format!("unknown config key {other:?}"),
                ));
            }
        }
    }
    if !t_max_set {
        cfg.t_max = ((cfg.t_pred / 2) as u64).max(1);
    }
    crate::types::validate_config(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_config(path, &text)
}

/// Parses a scenario spec from flat `key=value` text; omitted keys keep
/// their defaults.
pub fn parse_scenario_spec(path: &Path, text: &str) -> Result<ScenarioSpec> {
    let mut spec = ScenarioSpec::default();
    for (lineno, key, value) in kv_pairs(path, text)? {
        match key.as_str() {
            "seed" => spec.seed = parse_value(path, lineno, &key, &value)?,
            "n_agents" => spec.n_agents = parse_value(path, lineno, &key, &value)?,
            "n_frames" => spec.n_frames = parse_value(path, lineno, &key, &value)?,
            "arena_width" => spec.arena_width = parse_value(path, lineno, &key, &value)?,
            "arena_height" => spec.arena_height = parse_value(path, lineno, &key, &value)?,
            "speed_min" => spec.speed_min = parse_value(path, lineno, &key, &value)?,
            "speed_max" => spec.speed_max = parse_value(path, lineno, &key, &value)?,
            "turn_prob" => spec.turn_prob = parse_value(path, lineno, &key, &value)?,
            "noise_sigma" => spec.noise_sigma = parse_value(path, lineno, &key, &value)?,
            "miss_prob" => spec.miss_prob = parse_value(path, lineno, &key, &value)?,
            "merge_radius" => spec.merge_radius = parse_value(path, lineno, &key, &value)?,
            "clutter_rate" => spec.clutter_rate = parse_value(path, lineno, &key, &value)?,
            "clutter_amplitude" => {
                spec.clutter_amplitude = parse_value(path, lineno, &key, &value)?
            }
            "clutter_period" => spec.clutter_period = parse_value(path, lineno, &key, &value)?,
            "idswap_at_crossing" => {
                spec.idswap_at_crossing = parse_value(path, lineno, &key, &value)?
            }
            other => {
                return Err(parse_error(
                    path,
                    lineno,
                    format!("unknown scenario key {other:?}"),
                ));
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

pub fn load_scenario_spec(path: impl AsRef<Path>) -> Result<ScenarioSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_scenario_spec(path, &text)
}

/// Key=value lines for a tracking report.
pub fn mot_report_lines(report: &MotReport) -> String {
    format!(
        "mota={:.6}\nidf1={:.6}\nidsw={}\nfp={}\nfn={}\ngt={}\n",
        report.mota,
        report.idf1,
        report.idsw,
        report.false_positives,
        report.false_negatives,
        report.gt_annotations
    )
}

/// Key=value lines for a forecast evaluation point.
pub fn prediction_eval_lines(eval: &PredictionEval) -> String {
    let mut out = format!(
        "tau={:.6}\nrecall={:.6}\nmatched={}\neligible={}\nsquared={}\n",
        eval.tau, eval.recall, eval.matched, eval.eligible, eval.squared
    );
    match eval.ade {
        Some(ade) => writeln!(out, "ade={ade:.6}").expect("string write"),
        None => out.push_str("ade=\n"),
    }
    out
}

/// Plot-ready `tau,recall,ade,matched` rows; an undefined error is an
/// empty field.
pub fn curve_csv(curve: &AdeCurve) -> String {
    let mut out = String::from(CURVE_FILE_HEADER);
    out.push('\n');
    for p in &curve.points {
        let ade = p.ade.map_or(String::new(), |a| format!("{a:.6}"));
        writeln!(out, "{:.6},{:.6},{},{}", p.tau, p.recall, ade, p.matched).expect("string write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::euclidean;

    fn tmp_dir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("retrack-io-{tag}-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn write(path: &Path, text: &str) {
        fs::write(path, text).unwrap();
    }

    #[test]
    fn identity_homography_is_a_noop() {
        let p = Point2::new(3.5, -2.0);
        assert_eq!(Homography::IDENTITY.apply(p).unwrap(), p);
    }

    #[test]
    fn scaling_homography_doubles_coordinates() {
        let h = Homography::new([2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(
            h.apply(Point2::new(1.5, -4.0)).unwrap(),
            Point2::new(3.0, -8.0)
        );
    }

    #[test]
    fn translation_homography() {
        let h = Homography::new([1.0, 0.0, 5.0, 0.0, 1.0, -3.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(
            h.apply(Point2::new(2.0, 2.0)).unwrap(),
            Point2::new(7.0, -1.0)
        );
    }

    #[test]
    fn singular_homography_is_rejected() {
        assert!(Homography::new([1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn vanishing_point_is_an_error() {
        // Projective map with the line x = -1 at infinity.
        let h = Homography::new([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(h.apply(Point2::new(-1.0, 5.0)).is_err());
        assert!(h.apply(Point2::new(1.0, 4.0)).is_ok());
    }

    #[test]
    fn track_file_round_trip() {
        let dir = tmp_dir("roundtrip");
        let path = dir.join("tracks.csv");
        let trajs = vec![
            Trajectory::new(
                TrackId(1),
                0,
                vec![
                    Point2::new(0.123456789, -4.2),
                    Point2::new(1.0, -4.0),
                    Point2::new(2.0, -3.8),
                ],
            )
            .unwrap(),
            Trajectory::new(TrackId(7), 5, vec![Point2::new(10.5, 10.5)]).unwrap(),
        ];
        save_tracks(&path, &trajs).unwrap();
        let loaded = load_tracks(&path, None, None).unwrap();
        assert_eq!(loaded.len(), trajs.len());
        for (a, b) in loaded.iter().zip(&trajs) {
            assert_eq!(a.id(), b.id());
            assert_eq!(a.start(), b.start());
            for (pa, pb) in a.points().iter().zip(b.points()) {
                assert!(euclidean(*pa, *pb) < 1e-6);
            }
        }
    }

    #[test]
    fn load_splits_at_gaps_with_fresh_ids() {
        let dir = tmp_dir("gaps");
        let path = dir.join("tracks.csv");
        write(
            &path,
            "frame,track_id,x,y\n0,3,0,0\n1,3,1,0\n4,3,4,0\n5,3,5,0\n",
        );
        let loaded = load_tracks(&path, None, None).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].id(), TrackId(3));
        assert_eq!(loaded[0].len(), 2);
        assert_eq!(loaded[1].id(), TrackId(4));
        assert_eq!(loaded[1].start(), 4);
    }

    #[test]
    fn load_applies_homography_and_stride() {
        let dir = tmp_dir("hs");
        let path = dir.join("tracks.csv");
        write(
            &path,
            "frame,track_id,x,y\n0,1,1,1\n1,1,9,9\n2,1,2,2\n4,1,3,3\n",
        );
        let h = Homography::new([2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let loaded = load_tracks(&path, Some(&h), Some(2)).unwrap();
        assert_eq!(loaded.len(), 1);
        let t = &loaded[0];
        assert_eq!(t.start(), 0);
        assert_eq!(t.len(), 3);
        assert_eq!(t.points()[0], Point2::new(2.0, 2.0));
        assert_eq!(t.points()[1], Point2::new(4.0, 4.0));
        assert_eq!(t.points()[2], Point2::new(6.0, 6.0));
    }

    #[test]
    fn load_rejects_duplicates_and_bad_rows() {
        let dir = tmp_dir("bad");
        let dup = dir.join("dup.csv");
        write(&dup, "frame,track_id,x,y\n0,1,0,0\n0,1,1,1\n");
        assert!(load_tracks(&dup, None, None).is_err());

        let short = dir.join("short.csv");
        write(&short, "frame,track_id,x,y\n0,1,0\n");
        assert!(load_tracks(&short, None, None).is_err());

        let garbage = dir.join("garbage.csv");
        write(&garbage, "frame,track_id,x,y\n0,1,zero,0\n");
        assert!(load_tracks(&garbage, None, None).is_err());
    }

    #[test]
    fn config_parsing_defaults_and_overrides() {
        let path = Path::new("test.cfg");
        let cfg = parse_config(path, "").unwrap();
        assert_eq!(cfg, PipelineConfig::default());

        let cfg = parse_config(path, "t_obs=3\nalpha=0.7\nade_squared=false\n").unwrap();
        assert_eq!(cfg.t_obs, 3);
        assert_eq!(cfg.alpha, 0.7);
        assert!(!cfg.ade_squared);

        // t_max follows a shrunken horizon unless given explicitly.
        let cfg = parse_config(path, "t_pred=8\n").unwrap();
        assert_eq!(cfg.t_max, 4);
        let cfg = parse_config(path, "t_pred=8\nt_max=7\n").unwrap();
        assert_eq!(cfg.t_max, 7);

        assert!(parse_config(path, "nonsense=1\n").is_err());
        assert!(parse_config(path, "alpha=0\n").is_err());
        assert!(parse_config(path, "alpha\n").is_err());
    }

    #[test]
    fn scenario_spec_parsing() {
        let path = Path::new("scene.cfg");
        let spec = parse_scenario_spec(
            path,
            "seed=9\nn_agents=3\nn_frames=50\nidswap_at_crossing=true\n# comment\n",
        )
        .unwrap();
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.n_agents, 3);
        assert_eq!(spec.n_frames, 50);
        assert!(spec.idswap_at_crossing);
        assert!(parse_scenario_spec(path, "miss_prob=2\n").is_err());
        assert!(parse_scenario_spec(path, "wat=1\n").is_err());
    }

    #[test]
    fn report_lines_are_stable() {
        let report = MotReport {
            idf1: 0.5,
            mota: 0.25,
            idsw: 3,
            false_positives: 4,
            false_negatives: 5,
            gt_annotations: 16,
        };
        let text = mot_report_lines(&report);
        assert!(text.contains("mota=0.250000"));
        assert!(text.contains("fn=5"));
        let eval = PredictionEval {
            tau: 1.0,
            recall: 0.5,
            ade: None,
            matched: 2,
            eligible: 4,
            squared: true,
        };
        assert!(prediction_eval_lines(&eval).contains("ade=\n"));
    }
}
