mod common;

use std::path::Path;

use common::{courtpose, json, p, read};
use tempfile::TempDir;

const EXACT_POINTS: &str = "\
# cam_x cam_y world_x world_y
176 440 0 0
676 440 6.096 0
566 120 6.096 13.411
286 120 0 13.411
";

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn calibrate_exact_fixture() {
    let dir = TempDir::new().unwrap();
    let points = write(dir.path(), "court.txt", EXACT_POINTS);
    let out = dir.path().join("H.json");
    let r = courtpose(&["calibrate", "--points", &points, "--out", p(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let h = json(&out);
    assert!(h["world_reprojection"]["max"].as_f64().unwrap() < 1e-9);
    assert!(h["camera_reprojection_px"]["max"].as_f64().unwrap() < 1e-9);
    assert_eq!(h["matrix"].as_array().unwrap().len(), 3);
    assert_eq!(h["points"], 4);
}

#[test]
fn collinear_calibration_is_a_domain_error() {
    let dir = TempDir::new().unwrap();
    let points = write(dir.path(), "line.txt", "0 0 0 0\n1 1 1 1\n2 2 2 2\n3 3 3 3\n");
    let r = courtpose(&["calibrate", "--points", &points, "--out", p(&dir.path().join("H.json"))]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error: calibration failed"), "{}", r.stderr);
    assert_eq!(r.stderr.lines().count(), 1);
}

#[test]
fn missing_input_is_an_io_error() {
    let r = courtpose(&[
        "track",
        "--detections",
        "missing.jsonl",
        "--court",
        "court.txt",
        "--homography",
        "H.json",
        "--out",
        "tracks.csv",
    ]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error: cannot open missing.jsonl"), "{}", r.stderr);
    assert_eq!(r.stderr.lines().count(), 1);
    assert!(r.stdout.is_empty());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(courtpose(&["frobnicate"]).code, 2);
    assert_eq!(courtpose(&["calibrate", "--points"]).code, 2);
    let r = courtpose(&["calibrate"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error:"));
    assert_eq!(r.stderr.lines().count(), 1);
    assert_eq!(courtpose(&["--help"]).code, 0);
}

#[test]
fn malformed_input_reports_the_line() {
    let dir = TempDir::new().unwrap();
    let points = write(dir.path(), "bad.txt", "176 440 0 0\n676 440 six 0\n");
    let r = courtpose(&["calibrate", "--points", &points, "--out", p(&dir.path().join("H.json"))]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 2"), "{}", r.stderr);
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out-dir", p(dir)];
    args.extend_from_slice(extra);
    let r = courtpose(&args);
    assert_eq!(r.code, 0, "{}", r.stderr);
}

#[test]
fn track_refuses_poor_calibration() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    synth(d, &["--seed", "1"]);
    // a calibration point moved by 20 px
    let mut text = read(&d.join("calibration.txt"));
    text.push_str("446 280 3.048 5.0\n");
    let noisy = write(d, "noisy.txt", &text);
    let h = d.join("H.json");
    assert_eq!(courtpose(&["calibrate", "--points", &noisy, "--out", p(&h)]).code, 0);
    let r = courtpose(&[
        "track",
        "--detections",
        p(&d.join("detections.jsonl")),
        "--court",
        p(&d.join("court.txt")),
        "--homography",
        p(&h),
        "--out",
        p(&d.join("tracks.csv")),
    ]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("--max-reproj-px"), "{}", r.stderr);
}

#[test]
fn single_player_stream_has_no_seed_frame() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let points = write(d, "court.txt", EXACT_POINTS);
    let polygon = write(d, "polygon.txt", "176 440\n676 440\n566 120\n286 120\n");
    let det =
        r#"{"frame":0,"image_size":[852,472],"detections":[{"bbox":[400,300,40,100],"score":0.9,"class":"person"}]}"#;
    let dets = write(d, "dets.jsonl", &format!("{det}\n"));
    let h = d.join("H.json");
    assert_eq!(courtpose(&["calibrate", "--points", &points, "--out", p(&h)]).code, 0);
    let r = courtpose(&["track", "--detections", &dets, "--court", &polygon, "--homography", p(&h), "--out", "x.csv"]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stderr.contains("seed"), "{}", r.stderr);
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    synth(d, &["--seed", "2"]);
    let h = d.join("H.json");
    assert_eq!(courtpose(&["calibrate", "--points", p(&d.join("calibration.txt")), "--out", p(&h)]).code, 0);
    let cfg = write(
        d,
        "cfg.json",
        &format!(
            r#"{{"detections": "{}", "court": "{}", "homography": "{}", "max_disp": -1, "vmax": 0.2}}"#,
            p(&d.join("detections.jsonl")),
            p(&d.join("court.txt")),
            p(&h)
        ),
    );
    let out = d.join("tracks.csv");
    let r = courtpose(&["--config", &cfg, "track", "--out", p(&out)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("--max-disp must be positive"), "{}", r.stderr);
    let r = courtpose(&["track", "--config", &cfg, "--out", p(&out), "--max-disp", "60"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(read(&out).starts_with("frame,player,"));
}

#[test]
fn pipeline_equals_stages_run_in_sequence() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let scene = write(
        a.path(),
        "scene.json",
        r#"{"seed": 8, "n_frames": 200, "jitter_sigma": 1.0, "miss_rate": 0.05, "fp_rate": 0.05, "pose_spike_rate": 0.03}"#,
    );
    let piped = a.path().join("out");
    let r = courtpose(&["pipeline", "--scene", &scene, "--out-dir", p(&piped)]);
    assert_eq!(r.code, 0, "{}", r.stderr);

    let d = b.path();
    let f = |name: &str| d.join(name).to_str().unwrap().to_string();
    let mut stdout = String::new();
    let stages: Vec<Vec<String>> = vec![
        vec!["synth".into(), "--scene".into(), scene.clone(), "--out-dir".into(), p(d).to_string()],
        vec!["calibrate".into(), "--points".into(), f("calibration.txt"), "--out".into(), f("homography.json")],
        vec![
            "track".into(),
            "--detections".into(),
            f("detections.jsonl"),
            "--court".into(),
            f("court.txt"),
            "--homography".into(),
            f("homography.json"),
            "--out".into(),
            f("tracks.csv"),
        ],
        vec![
            "repair-poses".into(),
            "--poses".into(),
            f("poses.jsonl"),
            "--out".into(),
            f("poses_repaired.jsonl"),
            "--features-dir".into(),
            p(d).to_string(),
        ],
        vec![
            "evaluate".into(),
            "--tracks".into(),
            f("tracks.csv"),
            "--ground-truth".into(),
            f("ground_truth.csv"),
            "--out".into(),
            f("report.json"),
            "--homography".into(),
            f("homography.json"),
            "--svg".into(),
            f("error_curve.svg"),
        ],
        vec!["render".into(), "--tracks".into(), f("tracks.csv"), "--out".into(), f("topview.svg")],
    ];
    for stage in &stages {
        let args: Vec<&str> = stage.iter().map(String::as_str).collect();
        let r = courtpose(&args);
        assert_eq!(r.code, 0, "{:?}: {}", stage, r.stderr);
        stdout.push_str(&r.stdout);
    }
    let mut names: Vec<String> =
        std::fs::read_dir(&piped).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names.len(), 15, "{names:?}");
    for name in &names {
        assert_eq!(read(&piped.join(name)), read(&d.join(name)), "{name}");
    }
    assert_eq!(r.stdout.replace(p(&piped), "DIR"), stdout.replace(p(d), "DIR"));
}
