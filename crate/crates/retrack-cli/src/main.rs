//! Command-line pipeline around the `retrack` library.
//!
//! Subcommands:
//! - `simulate`: generate a seeded scene (ground truth + corrupted tracker
//!   output) from a scenario spec file.
//! - `retrack`: refine a track file by forecast-consistency re-tracking,
//!   writing the refined tracks and a per-frame forecast file.
//! - `evaluate`: score a hypothesis track file against ground truth in
//!   `mot`, `ade`, or `curve` mode, printing key=value lines and optionally
//!   writing a machine-readable report.
//!
//! Every command is deterministic for a fixed seed, config and inputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use retrack::io;
use retrack::metrics::{
    ade_over_recall, frame_outputs_from_trajectories, frame_outputs_with_predictions, mot_evaluate,
    GroundTruthScene,
};
use retrack::simulator::Scenario;
use retrack::types::PipelineConfig;
use retrack::HoltPredictor;

#[derive(Parser)]
#[command(
    name = "retrack",
    version,
    about = "Refine tracker output by forecast consistency"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Mot,
    Ade,
    Curve,
}

#[derive(Subcommand)]
enum Commands {
    /// Generate a synthetic scene from a scenario spec file.
    Simulate {
        /// Scenario spec (key=value text).
        spec: PathBuf,
        /// Output directory for gt.csv and tracker.csv.
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Refine a track file; writes refined tracks and a forecast file.
    Retrack {
        /// Input track file (frame,track_id,x,y).
        tracks: PathBuf,
        /// Refined track file to write; forecasts go to a sibling
        /// `<stem>.predictions.csv`.
        #[arg(long)]
        out: PathBuf,
        /// Pipeline config file (key=value text).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Row-major 3x3 homography applied to input coordinates.
        #[arg(long)]
        homography: Option<PathBuf>,
        /// Keep only frames divisible by this stride, renumbered.
        #[arg(long)]
        stride: Option<u64>,
    },
    /// Score a hypothesis track file against ground truth.
    Evaluate {
        /// Ground-truth track file.
        gt: PathBuf,
        /// Hypothesis track file.
        hyp: PathBuf,
        /// mot: tracking metrics; ade: forecast error at one threshold;
        /// curve: threshold sweep.
        #[arg(long)]
        mode: EvalMode,
        /// Pipeline config file (key=value text).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report file: JSON for mot/ade, CSV rows for curve.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Homography applied to both input files.
        #[arg(long)]
        homography: Option<PathBuf>,
        /// Stride applied to both input files.
        #[arg(long)]
        stride: Option<u64>,
        /// Association threshold for ade mode (square meters).
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        /// Comma-separated thresholds for curve mode
        /// (default 0.25,0.5,...,4.0).
        #[arg(long)]
        taus: Option<String>,
        /// World-plane gate for MOT matching, meters.
        #[arg(long, default_value_t = 1.0)]
        match_radius: f64,
    },
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<PipelineConfig> {
    match path {
        Some(p) => Ok(io::load_config(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_homography(path: &Option<PathBuf>) -> anyhow::Result<Option<io::Homography>> {
    match path {
        Some(p) => Ok(Some(io::Homography::load(p)?)),
        None => Ok(None),
    }
}

fn predictions_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.predictions.csv"))
}

fn default_taus() -> Vec<f64> {
    (1..=16).map(|k| k as f64 * 0.25).collect()
}

fn parse_taus(text: &str) -> anyhow::Result<Vec<f64>> {
    let taus: Vec<f64> = text
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .with_context(|| format!("bad threshold {tok:?}"))
        })
        .collect::<anyhow::Result<_>>()?;
    if taus.is_empty() {
        bail!("threshold list is empty");
    }
    if taus.windows(2).any(|w| w[0] > w[1]) {
        bail!("thresholds must be sorted ascending");
    }
    if taus.iter().any(|t| *t < 0.0 || !t.is_finite()) {
        bail!("thresholds must be finite and non-negative");
    }
    Ok(taus)
}

fn frame_range(trajectories: &[retrack::Trajectory]) -> Option<(u64, u64)> {
    let lo = trajectories.iter().map(|t| t.start()).min()?;
    let hi = trajectories.iter().map(|t| t.end()).max()?;
    Some((lo, hi))
}

fn run_command(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Commands::Simulate { spec, out, seed } => {
            let mut scenario_spec = io::load_scenario_spec(&spec)?;
            if let Some(seed) = seed {
                scenario_spec.seed = seed;
            }
            let scenario = Scenario::generate(&scenario_spec)?;
            fs::create_dir_all(&out)
                .with_context(|| format!("creating output directory {}", out.display()))?;
            let gt: Vec<retrack::Trajectory> = scenario.gt.subjects().values().cloned().collect();
            io::save_tracks(out.join("gt.csv"), &gt)?;
            io::save_tracks(out.join("tracker.csv"), &scenario.tracker_out)?;
            println!("seed={}", scenario_spec.seed);
            println!("agents={}", scenario_spec.n_agents);
            println!("frames={}", scenario_spec.n_frames);
            println!("tracker_trajectories={}", scenario.tracker_out.len());
            println!("clutter_tracks={}", scenario.clutter_ids.len());
            Ok(())
        }
        Commands::Retrack {
            tracks,
            out,
            config,
            homography,
            stride,
        } => {
            let cfg = load_config(&config)?;
            let h = load_homography(&homography)?;
            let input = io::load_tracks(&tracks, h.as_ref(), stride)?;
            let outputs = retrack::run(&input, &cfg, &HoltPredictor)?;
            io::save_frame_outputs(&out, &outputs)?;
            let pred_path = predictions_path(&out);
            io::save_predictions(&pred_path, &outputs)?;
            let rows: usize = outputs.iter().map(|o| o.tracks.len()).sum();
            println!("input_trajectories={}", input.len());
            println!("frames={}", outputs.len());
            println!("output_rows={rows}");
            println!("predictions={}", pred_path.display());
            Ok(())
        }
        Commands::Evaluate {
            gt,
            hyp,
            mode,
            config,
            out,
            homography,
            stride,
            tau,
            taus,
            match_radius,
        } => {
            let cfg = load_config(&config)?;
            let h = load_homography(&homography)?;
            let gt_tracks = io::load_tracks(&gt, h.as_ref(), stride)?;
            let hyp_tracks = io::load_tracks(&hyp, h.as_ref(), stride)?;
            if let (Some(gr), Some(hr)) = (frame_range(&gt_tracks), frame_range(&hyp_tracks)) {
                if gr != hr {
                    eprintln!(
                        "warning: frame ranges differ (gt {}..{}, hyp {}..{}); \
                         evaluating over the union",
                        gr.0, gr.1, hr.0, hr.1
                    );
                }
            }
            let scene = GroundTruthScene::new(gt_tracks)?;
            match mode {
                EvalMode::Mot => {
                    let outputs = frame_outputs_from_trajectories(&hyp_tracks);
                    let report = mot_evaluate(&scene, &outputs, match_radius)?;
                    print!("{}", io::mot_report_lines(&report));
                    if let Some(path) = out {
                        fs::write(&path, serde_json::to_string_pretty(&report)?)?;
                    }
                }
                EvalMode::Ade => {
                    let outputs = frame_outputs_with_predictions(&hyp_tracks, &cfg, &HoltPredictor);
                    let eval = retrack::metrics::prediction_evaluate(&scene, &outputs, tau, &cfg);
                    print!("{}", io::prediction_eval_lines(&eval));
                    if let Some(path) = out {
                        fs::write(&path, serde_json::to_string_pretty(&eval)?)?;
                    }
                }
                EvalMode::Curve => {
                    let grid = match &taus {
                        Some(text) => parse_taus(text)?,
                        None => default_taus(),
                    };
                    let outputs = frame_outputs_with_predictions(&hyp_tracks, &cfg, &HoltPredictor);
                    let curve = ade_over_recall(&scene, &outputs, &grid, &cfg);
                    let csv = io::curve_csv(&curve);
                    print!("{csv}");
                    if let Some(path) = out {
                        fs::write(&path, csv)?;
                    }
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
