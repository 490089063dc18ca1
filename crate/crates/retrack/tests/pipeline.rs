//! End-to-end pipeline behavior on constructed scenes: the failure modes
//! the re-tracker is supposed to repair, verified against the evaluator.

use retrack::metrics::{
    frame_outputs_from_trajectories, mot_evaluate, prediction_evaluate, GroundTruthScene,
};
use retrack::simulator::{corrupt, crossing_scene, Scenario, ScenarioSpec};
use retrack::types::{PipelineConfig, Point2, TrackId, Trajectory, Vec2};
use retrack::{run, HoltPredictor};

const MATCH_RADIUS: f64 = 1.0;

fn quiet_spec() -> ScenarioSpec {
    ScenarioSpec {
        noise_sigma: 0.0,
        miss_prob: 0.0,
        merge_radius: 0.0,
        clutter_rate: 0.0,
        turn_prob: 0.0,
        ..Default::default()
    }
}

#[test]
fn crossing_with_idswap_is_repaired() {
    let cfg = PipelineConfig::default();
    let mut input_idsw = 0;
    let mut output_idsw = 0;
    for seed in 0..10u64 {
        let (gt, _) = crossing_scene(seed, 40, (0.4, 0.7)).unwrap();
        let spec = ScenarioSpec {
            seed,
            n_frames: 40,
            merge_radius: 0.8,
            noise_sigma: 0.02,
            idswap_at_crossing: true,
            ..quiet_spec()
        };
        let corrupted = corrupt(&gt, &spec).unwrap();

        let input_report = mot_evaluate(
            &gt,
            &frame_outputs_from_trajectories(&corrupted),
            MATCH_RADIUS,
        )
        .unwrap();
        let outputs = run(&corrupted, &cfg, &HoltPredictor).unwrap();
        let output_report = mot_evaluate(&gt, &outputs, MATCH_RADIUS).unwrap();

        input_idsw += input_report.idsw;
        output_idsw += output_report.idsw;
    }
    assert!(input_idsw > 0, "corruption must induce switches");
    assert!(
        output_idsw * 2 <= input_idsw,
        "re-tracking should repair most swaps: {output_idsw} vs {input_idsw}"
    );
}

#[test]
fn oscillating_clutter_is_suppressed() {
    let cfg = PipelineConfig::default();
    let spec = ScenarioSpec {
        seed: 4,
        n_agents: 3,
        n_frames: 120,
        noise_sigma: 0.03,
        clutter_rate: 5.0,
        clutter_amplitude: 3.0,
        clutter_period: 2,
        turn_prob: 0.0,
        miss_prob: 0.0,
        merge_radius: 0.0,
        ..Default::default()
    };
    let scenario = Scenario::generate(&spec).unwrap();
    assert!(!scenario.clutter_ids.is_empty());

    let input_report = mot_evaluate(
        &scenario.gt,
        &frame_outputs_from_trajectories(&scenario.tracker_out),
        MATCH_RADIUS,
    )
    .unwrap();
    let outputs = run(&scenario.tracker_out, &cfg, &HoltPredictor).unwrap();
    let output_report = mot_evaluate(&scenario.gt, &outputs, MATCH_RADIUS).unwrap();

    // Clutter observations should not survive into confirmed output.
    let clutter: Vec<&Trajectory> = scenario
        .tracker_out
        .iter()
        .filter(|t| scenario.clutter_ids.contains(&t.id()))
        .collect();
    let mut leaked = 0;
    for out in &outputs {
        for row in &out.tracks {
            for c in &clutter {
                if let Some(p) = c.point_at(out.frame) {
                    if retrack::euclidean(p, row.pos) < 1e-9 {
                        leaked += 1;
                    }
                }
            }
        }
    }
    assert_eq!(
        leaked, 0,
        "no clutter observation may reach confirmed output"
    );
    assert!(
        output_report.false_positives * 2 <= input_report.false_positives,
        "FP should drop by at least half: {} vs {}",
        output_report.false_positives,
        input_report.false_positives
    );
}

#[test]
fn detection_gap_is_bridged_with_one_identity() {
    let cfg = PipelineConfig::default();
    // Straight walker, observations missing for frames 20..=23 (gap of 4,
    // within t_max = 6).
    let n = 60usize;
    let v = Vec2::new(0.4, 0.1);
    let points: Vec<Point2> = (0..n)
        .map(|k| Point2::new(1.0, 2.0) + v * (k as f64))
        .collect();
    let gt_traj = Trajectory::new(TrackId(0), 0, points.clone()).unwrap();
    let gt = GroundTruthScene::new(vec![gt_traj]).unwrap();

    let frag_a = Trajectory::new(TrackId(1), 0, points[..20].to_vec()).unwrap();
    let frag_b = Trajectory::new(TrackId(2), 24, points[24..].to_vec()).unwrap();

    let outputs = run(&[frag_a, frag_b], &cfg, &HoltPredictor).unwrap();
    let report = mot_evaluate(&gt, &outputs, MATCH_RADIUS).unwrap();
    assert_eq!(report.idsw, 0);

    let mut ids = std::collections::BTreeSet::new();
    for out in &outputs {
        for row in &out.tracks {
            ids.insert(row.id);
        }
    }
    assert_eq!(ids.len(), 1, "one identity spans the gap");
    // The gap frames are carried by the forecast, so they are not misses.
    assert_eq!(report.false_negatives, 0);
    assert_eq!(report.mota, 1.0);
    assert_eq!(report.idf1, 1.0);
}

#[test]
fn smoothing_lowers_forecast_error_on_noisy_lines() {
    let smooth_cfg = PipelineConfig::default();
    let raw_cfg = PipelineConfig {
        alpha: 1.0,
        beta: 0.0,
        ..Default::default()
    };
    let spec = ScenarioSpec {
        seed: 77,
        n_agents: 3,
        n_frames: 80,
        arena_width: 200.0,
        arena_height: 200.0,
        speed_min: 0.8,
        speed_max: 1.2,
        noise_sigma: 0.15,
        ..quiet_spec()
    };
    let scenario = Scenario::generate(&spec).unwrap();
    let hyp_smooth = retrack::metrics::frame_outputs_with_predictions(
        &scenario.tracker_out,
        &smooth_cfg,
        &HoltPredictor,
    );
    let hyp_raw = retrack::metrics::frame_outputs_with_predictions(
        &scenario.tracker_out,
        &raw_cfg,
        &HoltPredictor,
    );
    for tau in [0.25, 0.5, 1.0, 2.0] {
        let smooth = prediction_evaluate(&scenario.gt, &hyp_smooth, tau, &smooth_cfg);
        let raw = prediction_evaluate(&scenario.gt, &hyp_raw, tau, &raw_cfg);
        let (s, r) = (smooth.ade.unwrap(), raw.ade.unwrap());
        assert!(s < r, "tau {tau}: smoothed ADE {s} should beat raw ADE {r}");
    }
}

#[test]
fn assembled_outputs_are_structurally_sound() {
    // All corruption modes at once: the assembled outputs (including
    // backfilled rows) must stay well-formed.
    let cfg = PipelineConfig::default();
    for seed in 0..8u64 {
        let spec = ScenarioSpec {
            seed,
            n_agents: 6,
            n_frames: 150,
            noise_sigma: 0.08,
            miss_prob: 0.05,
            merge_radius: 0.8,
            clutter_rate: 3.0,
            turn_prob: 0.08,
            idswap_at_crossing: seed % 2 == 0,
            ..Default::default()
        };
        let scenario = Scenario::generate(&spec).unwrap();
        let outputs = run(&scenario.tracker_out, &cfg, &HoltPredictor).unwrap();

        let first = outputs.first().map(|o| o.frame).unwrap_or(0);
        let mut seen_rows = 0usize;
        for (k, out) in outputs.iter().enumerate() {
            assert_eq!(out.frame, first + k as u64, "frames contiguous");
            let mut prev: Option<TrackId> = None;
            for row in &out.tracks {
                assert!(row.pos.is_finite());
                if let Some(p) = prev {
                    assert!(row.id > p, "rows sorted, ids unique within a frame");
                }
                prev = Some(row.id);
                if let Some(pred) = &row.prediction {
                    assert_eq!(pred.horizon(), cfg.t_pred);
                    assert!(pred.origin_frame() <= out.frame);
                }
                seen_rows += 1;
            }
        }
        assert!(seen_rows > 0, "seed {seed}: some confirmed output");

        // Output ids never collide with input ids (disjoint namespaces).
        let max_input = scenario.tracker_out.iter().map(|t| t.id().0).max().unwrap();
        for out in &outputs {
            for row in &out.tracks {
                assert!(row.id.0 > max_input);
            }
        }
    }
}

#[test]
fn merged_subjects_both_survive() {
    // Two subjects crossing with merges but no id swap: both identities
    // must exist on both sides of the crossing, carried by forecasts
    // through the merge frames.
    let cfg = PipelineConfig::default();
    let (gt, cross) = crossing_scene(3, 40, (0.45, 0.6)).unwrap();
    let spec = ScenarioSpec {
        seed: 3,
        n_frames: 40,
        merge_radius: 0.8,
        noise_sigma: 0.02,
        idswap_at_crossing: false,
        ..quiet_spec()
    };
    let corrupted = corrupt(&gt, &spec).unwrap();
    let outputs = run(&corrupted, &cfg, &HoltPredictor).unwrap();
    let report = mot_evaluate(&gt, &outputs, MATCH_RADIUS).unwrap();
    assert_eq!(report.idsw, 0, "no switches through the merge");

    // Around the crossing both subjects should still be tracked.
    let near_cross = &outputs[cross as usize];
    assert_eq!(
        near_cross.tracks.len(),
        2,
        "both subjects present at crossing"
    );
    let input_report = mot_evaluate(
        &gt,
        &frame_outputs_from_trajectories(&corrupted),
        MATCH_RADIUS,
    )
    .unwrap();
    assert!(
        report.false_negatives <= input_report.false_negatives,
        "forecast carry-through should not increase misses"
    );
}
