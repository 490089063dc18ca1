//! Synthetic scene generation: ground-truth multi-agent trajectories plus a
//! corrupted "tracker output" realizing the classic failure modes of
//! detection-and-tracking pipelines.
//!
//! Corruption is applied to the ground truth directly, in order: additive
//! (3-sigma-clamped) Gaussian position noise, per-step detection drops,
//! proximity merges that collapse two nearby subjects into one midpoint
//! observation, optional id swaps when merged subjects separate, and
//! injected clutter tracks that oscillate around a fixed anchor. Oscillating
//! clutter mirrors swaying-vegetation false detections: its successive
//! forecasts disagree with each other, which is exactly the property the
//! re-tracker exploits to suppress it.
//!
//! Everything is deterministic under `(spec, seed)`; the generator,
//! corruptor and clutter injector consume independent, fixed RNG streams.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::metrics::GroundTruthScene;
use crate::types::{split_into_trajectories, Frame, Point2, TrackId, Trajectory, Vec2};
use crate::{Error, Result};

/// Parameters of a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_agents: usize,
    pub n_frames: usize,
    /// Arena width and height in meters; agents reflect off the walls.
    pub arena_width: f64,
    pub arena_height: f64,
    /// Per-agent speed range, meters/step.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Per-step probability of a random heading change.
    pub turn_prob: f64,
    /// Standard deviation of the position noise, meters (clamped at three
    /// sigma so corrupted observations stay attributable to their subject).
    pub noise_sigma: f64,
    /// Per-step probability of dropping an observation.
    pub miss_prob: f64,
    /// Distance at which two subjects collapse into one midpoint
    /// observation, meters.
    pub merge_radius: f64,
    /// Injected spurious tracks per 100 frames.
    pub clutter_rate: f64,
    /// Clutter oscillation amplitude, meters.
    pub clutter_amplitude: f64,
    /// Clutter oscillation period, frames.
    pub clutter_period: u64,
    /// Swap the two source streams when a merged pair separates.
    pub idswap_at_crossing: bool,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_agents: 5,
            n_frames: 100,
            arena_width: 30.0,
            arena_height: 30.0,
            speed_min: 0.3,
            speed_max: 0.8,
            turn_prob: 0.05,
            noise_sigma: 0.05,
            miss_prob: 0.02,
            merge_radius: 0.75,
            clutter_rate: 2.0,
            clutter_amplitude: 3.0,
            clutter_period: 2,
            idswap_at_crossing: false,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("turn_prob", self.turn_prob), ("miss_prob", self.miss_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} ∈ [0,1]")));
            }
        }
        for (name, m) in [
            ("noise_sigma", self.noise_sigma),
            ("merge_radius", self.merge_radius),
            ("clutter_rate", self.clutter_rate),
            ("clutter_amplitude", self.clutter_amplitude),
            ("speed_min", self.speed_min),
            ("speed_max", self.speed_max),
        ] {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::Config(format!("{name} ≥ 0")));
            }
        }
        if self.speed_min > self.speed_max {
            return Err(Error::Config("speed_min ≤ speed_max".into()));
        }
        if self.n_frames < 1 {
            return Err(Error::Config("n_frames ≥ 1".into()));
        }
        if !(self.arena_width > 0.0 && self.arena_height > 0.0) {
            return Err(Error::Config("arena dimensions > 0".into()));
        }
        if self.clutter_period < 1 {
            return Err(Error::Config("clutter_period ≥ 1".into()));
        }
        Ok(())
    }
}

/// A generated scene: ground truth plus its corrupted tracker output.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub gt: GroundTruthScene,
    pub tracker_out: Vec<Trajectory>,
    /// Output ids of the injected clutter tracks.
    pub clutter_ids: BTreeSet<TrackId>,
    pub spec: ScenarioSpec,
}

impl Scenario {
    pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
        spec.validate()?;
        let gt = generate_gt(spec)?;
        let (tracker_out, clutter_ids) = corrupt_with_info(&gt, spec)?;
        Ok(Scenario {
            gt,
            tracker_out,
            clutter_ids,
            spec: spec.clone(),
        })
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates ground-truth trajectories: piecewise-constant-velocity agents
/// with random heading changes, reflected at the arena walls. Subject ids
/// are `0..n_agents`.
pub fn generate_gt(spec: &ScenarioSpec) -> Result<GroundTruthScene> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, 0);
    let (w, h) = (spec.arena_width, spec.arena_height);
    let mut trajectories = Vec::with_capacity(spec.n_agents);
    for agent in 0..spec.n_agents {
        let mut pos = Point2::new(
            rng.random_range(0.1 * w..=0.9 * w),
            rng.random_range(0.1 * h..=0.9 * h),
        );
        let speed = rng.random_range(spec.speed_min..=spec.speed_max);
        let heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut velocity = Vec2::new(speed * heading.cos(), speed * heading.sin());

        let mut points = Vec::with_capacity(spec.n_frames);
        points.push(pos);
        for _ in 1..spec.n_frames {
            if rng.random_bool(spec.turn_prob) {
                let delta: f64 =
                    rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
                let (s, c) = delta.sin_cos();
                velocity = Vec2::new(
                    velocity.x * c - velocity.y * s,
                    velocity.x * s + velocity.y * c,
                );
            }
            pos = pos + velocity;
            if pos.x < 0.0 {
                pos.x = -pos.x;
                velocity.x = -velocity.x;
            } else if pos.x > w {
                pos.x = 2.0 * w - pos.x;
                velocity.x = -velocity.x;
            }
            if pos.y < 0.0 {
                pos.y = -pos.y;
                velocity.y = -velocity.y;
            } else if pos.y > h {
                pos.y = 2.0 * h - pos.y;
                velocity.y = -velocity.y;
            }
            points.push(pos);
        }
        trajectories.push(Trajectory::new(TrackId(agent as u64), 0, points)?);
    }
    GroundTruthScene::new(trajectories)
}

/// Two agents whose straight-line paths cross at the scene midpoint frame,
/// with a seeded approach angle and speeds. Returns the scene and the
/// crossing frame; at that frame the agents coincide up to the seeded
/// lateral offset.
pub fn crossing_scene(
    seed: u64,
    n_frames: usize,
    speed_range: (f64, f64),
) -> Result<(GroundTruthScene, Frame)> {
    let mut rng = stream_rng(seed, 3);
    let crossing = Point2::new(25.0, 25.0);
    let cross_frame = (n_frames / 2) as Frame;
    let base: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let separation: f64 =
        rng.random_range(std::f64::consts::FRAC_PI_4..3.0 * std::f64::consts::FRAC_PI_4);
    let offset: f64 = rng.random_range(0.0..0.2);
    let mut trajectories = Vec::new();
    for (agent, heading) in [(0u64, base), (1u64, base + separation)] {
        let speed = rng.random_range(speed_range.0..=speed_range.1);
        let v = Vec2::new(speed * heading.cos(), speed * heading.sin());
        let lateral = Vec2::new(-v.y, v.x) * (offset * agent as f64 / speed.max(1e-9));
        let points: Vec<Point2> = (0..n_frames)
            .map(|k| crossing + lateral + v * (k as f64 - cross_frame as f64))
            .collect();
        trajectories.push(Trajectory::new(TrackId(agent), 0, points)?);
    }
    Ok((GroundTruthScene::new(trajectories)?, cross_frame))
}

/// Corrupts ground truth into tracker-style output trajectories.
pub fn corrupt(gt: &GroundTruthScene, spec: &ScenarioSpec) -> Result<Vec<Trajectory>> {
    corrupt_with_info(gt, spec).map(|(t, _)| t)
}

#[allow(clippy::needless_range_loop)] // frame index k drives several parallel arrays
fn corrupt_with_info(
    gt: &GroundTruthScene,
    spec: &ScenarioSpec,
) -> Result<(Vec<Trajectory>, BTreeSet<TrackId>)> {
    spec.validate()?;
    let agents: Vec<(TrackId, &Trajectory)> = gt.subjects().iter().map(|(k, v)| (*k, v)).collect();
    let n = agents.len();
    let Some((first_frame, last_frame)) = gt.frame_range() else {
        return Ok((Vec::new(), BTreeSet::new()));
    };
    let span = (last_frame - first_frame + 1) as usize;

    let mut rng = stream_rng(spec.seed, 1);

    // Noise, clamped at three sigma.
    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).expect("finite sigma"))
    } else {
        None
    };
    let mut obs: Vec<Vec<Option<Point2>>> = vec![vec![None; span]; n];
    for (a, (_, traj)) in agents.iter().enumerate() {
        for (frame, p) in traj.iter() {
            let noisy = match &noise {
                Some(dist) => {
                    let mut d = Vec2::new(dist.sample(&mut rng), dist.sample(&mut rng));
                    let bound = 3.0 * spec.noise_sigma;
                    if d.norm() > bound {
                        d = d * (bound / d.norm());
                    }
                    p + d
                }
                None => p,
            };
            obs[a][(frame - first_frame) as usize] = Some(noisy);
        }
    }

    // Detection drops.
    if spec.miss_prob > 0.0 {
        for row in obs.iter_mut() {
            for cell in row.iter_mut() {
                if cell.is_some() && rng.random_bool(spec.miss_prob) {
                    *cell = None;
                }
            }
        }
    }

    // Proximity merges and id swaps on separation. `label[a]` is the output
    // stream agent `a` currently feeds.
    let mut label: Vec<usize> = (0..n).collect();
    let mut streams: Vec<Vec<(Frame, Point2)>> = vec![Vec::new(); n];
    let mut active: BTreeMap<(usize, usize), usize> = BTreeMap::new(); // pair -> keeper
    for k in 0..span {
        let frame = first_frame + k as Frame;
        if spec.merge_radius > 0.0 {
            for i in 0..n {
                for j in (i + 1)..n {
                    let (pi, pj) = (agents[i].1.point_at(frame), agents[j].1.point_at(frame));
                    let together = match (pi, pj) {
                        (Some(a), Some(b)) => crate::types::euclidean(a, b) <= spec.merge_radius,
                        _ => false,
                    };
                    if together {
                        let keeper = *active.entry((i, j)).or_insert_with(|| {
                            if rng.random_bool(0.5) {
                                i
                            } else {
                                j
                            }
                        });
                        if let (Some(a), Some(b)) = (obs[i][k], obs[j][k]) {
                            let mid = Point2::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
                            obs[keeper][k] = Some(mid);
                            let other = if keeper == i { j } else { i };
                            obs[other][k] = None;
                        }
                    } else if active.remove(&(i, j)).is_some() && spec.idswap_at_crossing {
                        label.swap(i, j);
                    }
                }
            }
        }
        for a in 0..n {
            if let Some(p) = obs[a][k] {
                streams[label[a]].push((frame, p));
            }
        }
    }

    let mut next_id = 1u64;
    let mut out = Vec::new();
    for stream in &streams {
        out.extend(split_into_trajectories(stream, &mut next_id));
    }

    // Clutter.
    let mut clutter_ids = BTreeSet::new();
    let n_clutter = (spec.clutter_rate * span as f64 / 100.0).round() as usize;
    if n_clutter > 0 && spec.clutter_amplitude >= 0.0 {
        let mut crng = stream_rng(spec.seed, 2);
        let half = (spec.clutter_period.max(2) / 2).max(1);
        for _ in 0..n_clutter {
            let dur = crng.random_range(10..=30usize).min(span);
            let start = first_frame + crng.random_range(0..=(span - dur)) as Frame;
            let anchor = Point2::new(
                crng.random_range(0.0..=spec.arena_width),
                crng.random_range(0.0..=spec.arena_height),
            );
            let theta: f64 = crng.random_range(0.0..std::f64::consts::TAU);
            let dir = Vec2::new(theta.cos(), theta.sin());
            let points: Vec<Point2> = (0..dur)
                .map(|k| {
                    let sign = if (k as u64 / half).is_multiple_of(2) {
                        1.0
                    } else {
                        -1.0
                    };
                    anchor + dir * (spec.clutter_amplitude * sign)
                })
                .collect();
            let id = TrackId(next_id);
            next_id += 1;
            clutter_ids.insert(id);
            out.push(Trajectory::new(id, start, points)?);
        }
    }

    Ok((out, clutter_ids))
}
