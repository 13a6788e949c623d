use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use courtpose::eval::{
    compare_trajectories, error_curve_svg, ground_truth_to_csv, ground_truth_track, parse_ground_truth,
    reports_to_table, ComparisonPlane, ErrorReport,
};
use courtpose::geometry::{estimate_homography, parse_correspondences, reprojection_error, Homography, ReprojStats};
use courtpose::model::{parse_detections, parse_poses, poses_to_jsonl, PlayerPoses, Source};
use courtpose::pose::{detect_outlier_frames, features_to_csv, repair, PoseSequence};
use courtpose::synth::{generate_scene, SceneConfig};
use courtpose::tracker::{parse_court, parse_tracks_csv, track_players, tracks_to_csv, CourtRegion, TrackerConfig};
use serde::{Deserialize, Serialize};

use crate::args::{CalibrateArgs, Command, EvaluateArgs, PipelineArgs, RenderArgs, RepairArgs, SynthArgs, TrackArgs};
use crate::{read_input, render, write_output, CliError};

/// Calibration result as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomographyFile {
    /// Camera pixels to court meters, canonical row-major form.
    pub matrix: Homography<f64>,
    pub points: usize,
    /// Errors of the calibration points mapped into the court, meters.
    pub world_reprojection: ReprojStats<f64>,
    /// Errors of the court points mapped back into the image, pixels.
    pub camera_reprojection_px: ReprojStats<f64>,
}

#[derive(Debug, Serialize)]
struct EvaluationEntry<'a> {
    #[serde(flatten)]
    report: &'a ErrorReport<f64>,
    ground_truth_frames: usize,
    coverage: f64,
}

#[derive(Debug, Serialize)]
struct EvaluationFile<'a> {
    plane: ComparisonPlane,
    cm_per_px: f64,
    players: Vec<EvaluationEntry<'a>>,
}

type Out<'a> = &'a mut dyn Write;

pub fn dispatch(command: Command, out: Out) -> Result<(), CliError> {
    match command {
        Command::Calibrate(a) => calibrate(&a, out),
        Command::Track(a) => track(&a, out),
        Command::RepairPoses(a) => repair_poses(&a, out),
        Command::Evaluate(a) => evaluate(&a, out),
        Command::Synth(a) => synth(&a, out),
        Command::Render(a) => render_tracks(&a, out),
        Command::Pipeline(a) => pipeline(&a, out),
    }
}

fn parse_error(path: &Path, e: impl Display) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::usage(format!("--{name} must be positive, got {v}")))
    }
}

fn say(out: Out, line: impl Display) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::usage(format!("cannot write to stdout: {e}")))
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialize");
    s.push('\n');
    s
}

fn load_homography(path: &Path) -> Result<HomographyFile, CliError> {
    serde_json::from_str(&read_input(path)?).map_err(|e| parse_error(path, e))
}

fn calibrate(a: &CalibrateArgs, out: Out) -> Result<(), CliError> {
    let pairs = parse_correspondences::<f64>(&read_input(&a.points)?).map_err(|e| parse_error(&a.points, e))?;
    let h = estimate_homography(&pairs).map_err(|e| CliError::domain(format!("calibration failed: {e}")))?;
    let world = reprojection_error(&h, &pairs).map_err(CliError::domain)?;
    let back: Vec<_> = pairs.iter().map(|c| c.swapped()).collect();
    let camera = h.inverse().and_then(|inv| reprojection_error(&inv, &back)).map_err(CliError::domain)?;
    let file =
        HomographyFile { matrix: h, points: pairs.len(), world_reprojection: world, camera_reprojection_px: camera };
    write_output(&a.out, &to_json(&file))?;
    say(
        out,
        format_args!(
            "calibrated from {} points: world rms {:.3e} m, camera max {:.3e} px",
            file.points, file.world_reprojection.rms, file.camera_reprojection_px.max
        ),
    )
}

fn track(a: &TrackArgs, out: Out) -> Result<(), CliError> {
    positive("max-disp", a.max_disp)?;
    positive("max-reproj-px", a.max_reproj_px)?;
    let frames = parse_detections::<f64>(&read_input(&a.detections)?).map_err(|e| parse_error(&a.detections, e))?;
    let polygon = parse_court::<f64>(&read_input(&a.court)?).map_err(|e| parse_error(&a.court, e))?;
    let calibration = load_homography(&a.homography)?;
    if calibration.camera_reprojection_px.max > a.max_reproj_px {
        return Err(CliError::domain(format!(
            "calibration camera reprojection max {:.3} px exceeds --max-reproj-px {}",
            calibration.camera_reprojection_px.max, a.max_reproj_px
        )));
    }
    let court = CourtRegion::new(polygon).map_err(CliError::domain)?;
    let config = TrackerConfig { max_disp: a.max_disp };
    let (near, far) = track_players(&frames, &court, &calibration.matrix, &config).map_err(CliError::domain)?;
    write_output(&a.out, &tracks_to_csv(&[near.clone(), far.clone()]))?;
    for t in [&near, &far] {
        let filled = t.points.iter().filter(|p| p.source == Source::Interpolated).count();
        say(
            out,
            format_args!(
                "{}: frames {}..={} ({} interpolated)",
                t.player,
                t.first_frame().unwrap_or(0),
                t.last_frame().unwrap_or(0),
                filled
            ),
        )?;
    }
    Ok(())
}

fn repair_poses(a: &RepairArgs, out: Out) -> Result<(), CliError> {
    positive("vmax", a.vmax)?;
    let streams = parse_poses::<f64>(&read_input(&a.poses)?).map_err(|e| parse_error(&a.poses, e))?;
    if streams.is_empty() {
        return Err(CliError::domain(format!("{}: no pose records", a.poses.display())));
    }
    let mut repaired_streams: Vec<PlayerPoses<f64>> = Vec::new();
    for stream in &streams {
        let seq = PoseSequence::from_player_poses(stream);
        let fail = |e| CliError::domain(format!("{} player: {e}", stream.player));
        let flagged = detect_outlier_frames(&seq, a.vmax).map_err(fail)?;
        let repaired = repair(&seq, a.vmax).map_err(fail)?;
        let mut file = repaired.to_player_poses();
        // network 2D keypoints are kept only where the 3D pose was kept
        file.poses_2d = stream
            .poses_2d
            .iter()
            .filter(|(f, _)| file.sources.get(f) == Some(&Source::Detected))
            .map(|(f, p)| (*f, p.clone()))
            .collect();
        if let Some(dir) = &a.features_dir {
            let csv = features_to_csv(&repaired).map_err(fail)?;
            write_output(&dir.join(format!("features_{}.csv", stream.player)), &csv)?;
        }
        say(
            out,
            format_args!(
                "{}: {} frames flagged, {} frames out, {} interpolated",
                stream.player,
                flagged.len(),
                repaired.poses.len(),
                repaired.interpolated.len()
            ),
        )?;
        repaired_streams.push(file);
    }
    write_output(&a.out, &poses_to_jsonl(&repaired_streams))
}

fn evaluate(a: &EvaluateArgs, out: Out) -> Result<(), CliError> {
    positive("cm-per-px", a.cm_per_px)?;
    let tracks = parse_tracks_csv::<f64>(&read_input(&a.tracks)?).map_err(|e| parse_error(&a.tracks, e))?;
    let rows = parse_ground_truth::<f64>(&read_input(&a.ground_truth)?).map_err(|e| parse_error(&a.ground_truth, e))?;
    let camera_from_world = match (a.plane, &a.homography) {
        (ComparisonPlane::Camera, None) => {
            return Err(CliError::usage("--plane camera needs --homography"));
        }
        (ComparisonPlane::Camera, Some(path)) => {
            Some(load_homography(path)?.matrix.inverse().map_err(CliError::domain)?)
        }
        _ => None,
    };
    if tracks.is_empty() {
        return Err(CliError::domain(format!("{}: no tracks", a.tracks.display())));
    }
    let mut reports = Vec::new();
    let mut gt_frames = Vec::new();
    for t in &tracks {
        let gt = ground_truth_track(&rows, t.player, camera_from_world.as_ref()).map_err(CliError::domain)?;
        reports.push(compare_trajectories(t, &gt, a.plane, a.cm_per_px).map_err(CliError::domain)?);
        gt_frames.push(gt.points.len());
    }
    let file = EvaluationFile {
        plane: a.plane,
        cm_per_px: a.cm_per_px,
        players: reports
            .iter()
            .zip(&gt_frames)
            .map(|(r, &n)| EvaluationEntry {
                report: r,
                ground_truth_frames: n,
                coverage: r.per_frame.len() as f64 / n as f64,
            })
            .collect(),
    };
    let mut json = serde_json::to_string(&file).expect("report serializes");
    json.push('\n');
    write_output(&a.out, &json)?;
    if let Some(svg) = &a.svg {
        write_output(svg, &error_curve_svg(&reports))?;
    }
    write!(out, "{}", reports_to_table(&reports)).map_err(|e| CliError::usage(format!("cannot write to stdout: {e}")))
}

struct SceneFiles {
    points: PathBuf,
    court: PathBuf,
    detections: PathBuf,
    poses: PathBuf,
    ground_truth: PathBuf,
}

fn synth_scene(a: &SynthArgs, out: Out) -> Result<SceneFiles, CliError> {
    let mut cfg = match &a.scene {
        Some(path) => serde_json::from_str::<SceneConfig>(&read_input(path)?).map_err(|e| parse_error(path, e))?,
        None => SceneConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let scene = generate_scene(&cfg).map_err(CliError::usage)?;
    let d = &a.out_dir;
    let files = SceneFiles {
        points: d.join("calibration.txt"),
        court: d.join("court.txt"),
        detections: d.join("detections.jsonl"),
        poses: d.join("poses.jsonl"),
        ground_truth: d.join("ground_truth.csv"),
    };
    write_output(&files.detections, &scene.detections_jsonl)?;
    write_output(&files.poses, &scene.poses_jsonl)?;
    write_output(&files.ground_truth, &ground_truth_to_csv(&scene.truth.rows()))?;
    write_output(&files.points, &cfg.calibration_text().map_err(CliError::usage)?)?;
    write_output(&files.court, &cfg.court_polygon_text().map_err(CliError::usage)?)?;
    write_output(&d.join("outliers.csv"), &scene.truth.outliers_csv())?;
    write_output(&d.join("scene_config.json"), &to_json(&cfg))?;
    say(out, format_args!("synthesized {} frames (seed {}) into {}", cfg.n_frames, cfg.seed, d.display()))?;
    Ok(files)
}

fn synth(a: &SynthArgs, out: Out) -> Result<(), CliError> {
    synth_scene(a, out).map(|_| ())
}

fn render_tracks(a: &RenderArgs, out: Out) -> Result<(), CliError> {
    positive("px-per-m", a.px_per_m)?;
    let tracks = parse_tracks_csv::<f64>(&read_input(&a.tracks)?).map_err(|e| parse_error(&a.tracks, e))?;
    write_output(&a.out, &render::topview_svg(&tracks, a.px_per_m))?;
    say(out, format_args!("rendered {} tracks to {}", tracks.len(), a.out.display()))
}

fn pipeline(a: &PipelineArgs, out: Out) -> Result<(), CliError> {
    let d = &a.out_dir;
    let synthesized = if a.scene.is_some() || a.seed.is_some() {
        Some(synth_scene(&SynthArgs { scene: a.scene.clone(), seed: a.seed, out_dir: d.clone() }, out)?)
    } else {
        None
    };
    let pick = |given: &Option<PathBuf>, from_scene: fn(&SceneFiles) -> &PathBuf| {
        given.clone().or_else(|| synthesized.as_ref().map(|s| from_scene(s).clone()))
    };
    let need = |p: Option<PathBuf>, flag: &str| {
        p.ok_or_else(|| CliError::usage(format!("pipeline needs --{flag}, --scene or --seed")))
    };
    let points = need(pick(&a.points, |s| &s.points), "points")?;
    let court = need(pick(&a.court, |s| &s.court), "court")?;
    let detections = need(pick(&a.detections, |s| &s.detections), "detections")?;
    let poses = pick(&a.poses, |s| &s.poses);
    let ground_truth = pick(&a.ground_truth, |s| &s.ground_truth);

    let homography = d.join("homography.json");
    let tracks = d.join("tracks.csv");
    calibrate(&CalibrateArgs { points, out: homography.clone() }, out)?;
    track(
        &TrackArgs {
            detections,
            court,
            homography: homography.clone(),
            out: tracks.clone(),
            max_disp: a.max_disp,
            max_reproj_px: a.max_reproj_px,
        },
        out,
    )?;
    if let Some(poses) = poses {
        repair_poses(
            &RepairArgs { poses, out: d.join("poses_repaired.jsonl"), vmax: a.vmax, features_dir: Some(d.clone()) },
            out,
        )?;
    }
    if let Some(ground_truth) = ground_truth {
        evaluate(
            &EvaluateArgs {
                tracks: tracks.clone(),
                ground_truth,
                out: d.join("report.json"),
                plane: a.plane,
                homography: Some(homography),
                cm_per_px: a.cm_per_px,
                svg: Some(d.join("error_curve.svg")),
            },
            out,
        )?;
    }
    render_tracks(&RenderArgs { tracks, out: d.join("topview.svg"), px_per_m: a.px_per_m }, out)
}
