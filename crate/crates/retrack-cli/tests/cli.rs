//! Black-box tests of the `retrack` binary: the simulate / retrack /
//! evaluate round trip, reproducibility, file formats, and error exits.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn retrack_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_retrack"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn retrack binary");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_kv(out: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&out.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
        .unwrap_or_else(|| panic!("missing key {key} in output:\n{text}"))
}

// Arena is large enough that straight walkers never reach a wall, so
// zero-corruption scenes stay exactly linear.
fn write_spec(path: &Path, extra: &str) {
    fs::write(
        path,
        format!(
            "seed=11\nn_agents=3\nn_frames=60\narena_width=400\narena_height=400\n\
             speed_min=0.3\nspeed_max=0.6\nturn_prob=0\nnoise_sigma=0\nmiss_prob=0\n\
             merge_radius=0\nclutter_rate=0\n{extra}"
        ),
    )
    .unwrap();
}

#[test]
fn simulate_retrack_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("scene.spec");
    write_spec(&spec, "");

    let out_dir = dir.path().join("scene");
    run_ok(
        retrack_bin()
            .arg("simulate")
            .arg(&spec)
            .arg("--out")
            .arg(&out_dir),
    );
    let gt = out_dir.join("gt.csv");
    let tracker = out_dir.join("tracker.csv");
    assert!(gt.exists() && tracker.exists());

    let refined = dir.path().join("refined.csv");
    let out = run_ok(
        retrack_bin()
            .arg("retrack")
            .arg(&tracker)
            .arg("--out")
            .arg(&refined),
    );
    assert!(refined.exists());
    let predictions = dir.path().join("refined.predictions.csv");
    assert!(predictions.exists(), "forecast file written alongside");
    assert_eq!(stdout_kv(&out, "frames"), "60");

    // Perfect input: the refined tracks must score perfectly.
    let out = run_ok(
        retrack_bin()
            .arg("evaluate")
            .arg(&gt)
            .arg(&refined)
            .arg("--mode")
            .arg("mot"),
    );
    assert_eq!(stdout_kv(&out, "mota"), "1.000000");
    assert_eq!(stdout_kv(&out, "idf1"), "1.000000");
    assert_eq!(stdout_kv(&out, "idsw"), "0");

    // Forecast error of straight walkers is zero.
    let report = dir.path().join("ade.json");
    let out = run_ok(
        retrack_bin()
            .arg("evaluate")
            .arg(&gt)
            .arg(&refined)
            .arg("--mode")
            .arg("ade")
            .arg("--tau")
            .arg("1.0")
            .arg("--out")
            .arg(&report),
    );
    assert_eq!(stdout_kv(&out, "recall"), "1.000000");
    assert_eq!(stdout_kv(&out, "ade"), "0.000000");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["recall"], 1.0);
    assert!(json["ade"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn outputs_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("scene.spec");
    write_spec(
        &spec,
        "noise_sigma=0.05\nmiss_prob=0.03\nmerge_radius=0.7\nclutter_rate=2\nturn_prob=0.05\n",
    );

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(
        retrack_bin()
            .arg("simulate")
            .arg(&spec)
            .arg("--out")
            .arg(&a),
    );
    run_ok(
        retrack_bin()
            .arg("simulate")
            .arg(&spec)
            .arg("--out")
            .arg(&b),
    );
    assert_eq!(
        fs::read(a.join("gt.csv")).unwrap(),
        fs::read(b.join("gt.csv")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("tracker.csv")).unwrap(),
        fs::read(b.join("tracker.csv")).unwrap()
    );

    let (ra, rb) = (dir.path().join("ra.csv"), dir.path().join("rb.csv"));
    run_ok(
        retrack_bin()
            .arg("retrack")
            .arg(a.join("tracker.csv"))
            .arg("--out")
            .arg(&ra),
    );
    run_ok(
        retrack_bin()
            .arg("retrack")
            .arg(b.join("tracker.csv"))
            .arg("--out")
            .arg(&rb),
    );
    assert_eq!(fs::read(&ra).unwrap(), fs::read(&rb).unwrap());
    assert_eq!(
        fs::read(dir.path().join("ra.predictions.csv")).unwrap(),
        fs::read(dir.path().join("rb.predictions.csv")).unwrap()
    );
}

#[test]
fn seed_flag_overrides_spec_seed() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("scene.spec");
    write_spec(&spec, "noise_sigma=0.05\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = run_ok(
        retrack_bin()
            .arg("simulate")
            .arg(&spec)
            .arg("--out")
            .arg(&a)
            .arg("--seed")
            .arg("99"),
    );
    assert_eq!(stdout_kv(&out, "seed"), "99");
    run_ok(
        retrack_bin()
            .arg("simulate")
            .arg(&spec)
            .arg("--out")
            .arg(&b),
    );
    assert_ne!(
        fs::read(a.join("tracker.csv")).unwrap(),
        fs::read(b.join("tracker.csv")).unwrap()
    );
}

#[test]
fn curve_mode_emits_monotone_grid() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("scene.spec");
    write_spec(&spec, "noise_sigma=0.08\n");
    let out_dir = dir.path().join("scene");
    run_ok(
        retrack_bin()
            .arg("simulate")
            .arg(&spec)
            .arg("--out")
            .arg(&out_dir),
    );

    let curve_path = dir.path().join("curve.csv");
    let out = run_ok(
        retrack_bin()
            .arg("evaluate")
            .arg(out_dir.join("gt.csv"))
            .arg(out_dir.join("tracker.csv"))
            .arg("--mode")
            .arg("curve")
            .arg("--out")
            .arg(&curve_path),
    );
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 16, "default grid 0.25..4.0");
    let mut last_recall = -1.0f64;
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 4);
        let recall: f64 = fields[1].parse().unwrap();
        assert!(recall >= last_recall, "recall must not decrease");
        last_recall = recall;
    }
    assert_eq!(fs::read_to_string(&curve_path).unwrap(), text);
}

#[test]
fn homography_and_stride_are_applied() {
    let dir = tempfile::tempdir().unwrap();
    // Pixel-ish coordinates at 2x scale, double frame rate.
    let tracks = dir.path().join("tracks.csv");
    let mut body = String::from("frame,track_id,x,y\n");
    for f in 0..40u64 {
        let x = 2.0 * (0.25 * f as f64);
        body.push_str(&format!("{f},1,{x:.6},10.000000\n"));
    }
    fs::write(&tracks, body).unwrap();
    let hom = dir.path().join("h.txt");
    fs::write(&hom, "0.5 0 0\n0 0.5 0\n0 0 1\n").unwrap();

    let refined = dir.path().join("refined.csv");
    let out = run_ok(
        retrack_bin()
            .arg("retrack")
            .arg(&tracks)
            .arg("--homography")
            .arg(&hom)
            .arg("--stride")
            .arg("2")
            .arg("--out")
            .arg(&refined),
    );
    assert_eq!(stdout_kv(&out, "frames"), "20");
    let text = fs::read_to_string(&refined).unwrap();
    // Renumbered frame n is original frame 2n at pixel x = n, so the world
    // x after the 0.5-scale homography is n / 2; y maps from 10 to 5.
    assert!(text
        .lines()
        .any(|l| l.starts_with("1,") && l.contains(",0.500000,")));
    assert!(text
        .lines()
        .any(|l| l.starts_with("2,") && l.contains(",1.000000,")));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",5.000000")));
}

#[test]
fn config_file_controls_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("scene.spec");
    write_spec(&spec, "");
    let out_dir = dir.path().join("scene");
    run_ok(
        retrack_bin()
            .arg("simulate")
            .arg(&spec)
            .arg("--out")
            .arg(&out_dir),
    );

    // probation=1 emits tracks from their first frame.
    let cfg = dir.path().join("pipeline.cfg");
    fs::write(&cfg, "probation=1\n").unwrap();
    let refined = dir.path().join("refined.csv");
    let out = run_ok(
        retrack_bin()
            .arg("retrack")
            .arg(out_dir.join("tracker.csv"))
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&refined),
    );
    assert_eq!(stdout_kv(&out, "output_rows"), "180"); // 3 agents x 60 frames
}

#[test]
fn custom_thresholds_and_match_radius() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("scene.spec");
    write_spec(&spec, "noise_sigma=0.05\n");
    let out_dir = dir.path().join("scene");
    run_ok(retrack_bin().arg("simulate").arg(&spec).arg("--out").arg(&out_dir));

    let out = run_ok(
        retrack_bin()
            .arg("evaluate")
            .arg(out_dir.join("gt.csv"))
            .arg(out_dir.join("tracker.csv"))
            .arg("--mode")
            .arg("curve")
            .arg("--taus")
            .arg("0.5,1.0,2.0"),
    );
    let rows = String::from_utf8_lossy(&out.stdout).lines().count();
    assert_eq!(rows, 4, "header plus one row per threshold");

    // Unsorted thresholds are rejected.
    let out = retrack_bin()
        .arg("evaluate")
        .arg(out_dir.join("gt.csv"))
        .arg(out_dir.join("tracker.csv"))
        .arg("--mode")
        .arg("curve")
        .arg("--taus")
        .arg("2.0,1.0")
        .output()
        .unwrap();
    assert!(!out.status.success());

    // A tiny match radius turns all hypothesis rows into false positives
    // except exact co-locations; with noise everything misses.
    let out = run_ok(
        retrack_bin()
            .arg("evaluate")
            .arg(out_dir.join("gt.csv"))
            .arg(out_dir.join("tracker.csv"))
            .arg("--mode")
            .arg("mot")
            .arg("--match-radius")
            .arg("0.000001"),
    );
    assert_eq!(stdout_kv(&out, "fn"), "180");
}

#[test]
fn errors_exit_nonzero_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();

    // Missing input file.
    let out = retrack_bin()
        .arg("retrack")
        .arg(dir.path().join("nope.csv"))
        .arg("--out")
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    // Invalid config key.
    let tracks = dir.path().join("t.csv");
    fs::write(&tracks, "frame,track_id,x,y\n0,1,0,0\n").unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "bogus=1\n").unwrap();
    let out = retrack_bin()
        .arg("retrack")
        .arg(&tracks)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    // Malformed scenario value.
    let spec = dir.path().join("bad.spec");
    fs::write(&spec, "miss_prob=2\n").unwrap();
    let out = retrack_bin()
        .arg("simulate")
        .arg(&spec)
        .arg("--out")
        .arg(dir.path().join("scene"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("miss_prob"));
}

#[test]
fn mismatched_frame_ranges_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.csv");
    let hyp = dir.path().join("hyp.csv");
    let mut gt_body = String::from("frame,track_id,x,y\n");
    let mut hyp_body = String::from("frame,track_id,x,y\n");
    for f in 0..30u64 {
        gt_body.push_str(&format!("{f},1,{}.000000,0.000000\n", f));
        if f < 20 {
            hyp_body.push_str(&format!("{f},1,{}.000000,0.000000\n", f));
        }
    }
    fs::write(&gt, gt_body).unwrap();
    fs::write(&hyp, hyp_body).unwrap();
    let out = run_ok(
        retrack_bin()
            .arg("evaluate")
            .arg(&gt)
            .arg(&hyp)
            .arg("--mode")
            .arg("mot"),
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("frame ranges differ"), "got: {stderr}");
    // The 10 uncovered ground-truth frames count as misses.
    assert_eq!(stdout_kv(&out, "fn"), "10");
}
