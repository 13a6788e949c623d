//! Trajectory error against ground truth.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Homography, Point2};
use crate::model::{Player, Source};
use crate::scalar::Scalar;
use crate::tracker::{Track, TrackFileError, TrackPoint};

pub const DEFAULT_CM_PER_PX: f64 = 2.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no common frames between estimate and ground truth for the {0} player")]
    NoOverlap(Player),
    #[error("tracks belong to different players ({0} vs {1})")]
    PlayerMismatch(Player, Player),
    #[error("cm_per_px must be positive")]
    InvalidScale,
}

pub fn px_to_cm<T: Scalar>(err_px: T, cm_per_px: T) -> T {
    err_px * cm_per_px
}

/// Plane in which positions are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComparisonPlane {
    /// Court plane rendered as a top-view image at `100 / cm_per_px` pixels per meter.
    TopView,
    /// Court plane in meters.
    World,
    /// Camera image pixels.
    Camera,
}

impl ComparisonPlane {
    pub fn unit(self) -> &'static str {
        match self {
            ComparisonPlane::World => "m",
            _ => "px",
        }
    }
}

impl std::str::FromStr for ComparisonPlane {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "topview" => Ok(Self::TopView),
            "world" => Ok(Self::World),
            "camera" => Ok(Self::Camera),
            other => Err(format!("unknown plane {other:?} (expected topview, world or camera)")),
        }
    }
}

/// Per-frame and summary error of one player's trajectory. Errors are in
/// the comparison plane's unit (`px`, or `m` for the world plane).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport<T> {
    pub player: Player,
    pub plane: ComparisonPlane,
    pub unit: &'static str,
    pub per_frame: Vec<(u64, T)>,
    pub mean_px: T,
    pub mean_cm: T,
    pub max_px: T,
}

fn plane_point<T: Scalar>(p: &TrackPoint<T>, plane: ComparisonPlane, cm_per_px: T) -> Point2<T> {
    match plane {
        ComparisonPlane::TopView => p.world * (T::lit(100.0) / cm_per_px),
        ComparisonPlane::World => p.world,
        ComparisonPlane::Camera => p.cam,
    }
}

/// Compares two tracks of the same player over their common frames.
pub fn compare_trajectories<T: Scalar>(
    est: &Track<T>,
    gt: &Track<T>,
    plane: ComparisonPlane,
    cm_per_px: T,
) -> Result<ErrorReport<T>, EvalError> {
    if !(cm_per_px > T::zero()) {
        return Err(EvalError::InvalidScale);
    }
    if est.player != gt.player {
        return Err(EvalError::PlayerMismatch(est.player, gt.player));
    }
    let truth: BTreeMap<u64, Point2<T>> =
        gt.points.iter().map(|p| (p.frame_id, plane_point(p, plane, cm_per_px))).collect();
    let mut per_frame: Vec<(u64, T)> = est
        .points
        .iter()
        .filter_map(|p| truth.get(&p.frame_id).map(|g| (p.frame_id, plane_point(p, plane, cm_per_px).distance(g))))
        .collect();
    per_frame.sort_by_key(|e| e.0);
    per_frame.dedup_by_key(|e| e.0);
    if per_frame.is_empty() {
        return Err(EvalError::NoOverlap(est.player));
    }
    let n = T::from_usize(per_frame.len()).expect("count fits in scalar");
    let mean = per_frame.iter().fold(T::zero(), |a, e| a + e.1) / n;
    let max = per_frame.iter().fold(T::zero(), |a, e| a.max(e.1));
    let mean_cm = match plane {
        ComparisonPlane::World => mean * T::lit(100.0),
        _ => px_to_cm(mean, cm_per_px),
    };
    Ok(ErrorReport { player: est.player, plane, unit: plane.unit(), per_frame, mean_px: mean, mean_cm, max_px: max })
}

/// Ground-truth rows `frame,player,x,y` with `x, y` in court meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthRow<T> {
    pub frame_id: u64,
    pub player: Player,
    pub world: Point2<T>,
}

pub fn parse_ground_truth<T: Scalar>(text: &str) -> Result<Vec<GroundTruthRow<T>>, TrackFileError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| TrackFileError::Parse { line, msg: e.to_string() })?;
        if line == 1 && record.get(0) == Some("frame") {
            continue;
        }
        if record.len() != 4 {
            return Err(TrackFileError::Parse { line, msg: format!("expected 4 fields, found {}", record.len()) });
        }
        let bad = |what: &str| TrackFileError::Parse { line, msg: format!("invalid {what}") };
        let frame_id = record[0].parse().map_err(|_| bad("frame"))?;
        let player = record[1].parse().map_err(|e: String| TrackFileError::Parse { line, msg: e })?;
        let x: f64 = record[2].parse().map_err(|_| bad("x"))?;
        let y: f64 = record[3].parse().map_err(|_| bad("y"))?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(bad("coordinate"));
        }
        rows.push(GroundTruthRow { frame_id, player, world: Point2::new(T::lit(x), T::lit(y)) });
    }
    Ok(rows)
}

pub fn load_ground_truth<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<GroundTruthRow<T>>, TrackFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| TrackFileError::Io { path: path.display().to_string(), source })?;
    parse_ground_truth(&text)
}

pub fn ground_truth_to_csv<T: Scalar>(rows: &[GroundTruthRow<T>]) -> String {
    let mut out = String::from("frame,player,world_x,world_y\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.frame_id, r.player, r.world.x, r.world.y);
    }
    out
}

/// Builds a ground-truth track for `player`. Camera positions are filled by
/// mapping the world positions through `camera_from_world` when given, and
/// mirror the world positions otherwise.
pub fn ground_truth_track<T: Scalar>(
    rows: &[GroundTruthRow<T>],
    player: Player,
    camera_from_world: Option<&Homography<T>>,
) -> Result<Track<T>, crate::geometry::GeometryError> {
    let mut points = Vec::new();
    for r in rows.iter().filter(|r| r.player == player) {
        let cam = match camera_from_world {
            Some(h) => h.apply(r.world)?,
            None => r.world,
        };
        points.push(TrackPoint { frame_id: r.frame_id, cam, world: r.world, source: Source::Detected });
    }
    points.sort_by_key(|p| p.frame_id);
    Ok(Track { player, points })
}

pub fn reports_to_table<T: Scalar>(reports: &[ErrorReport<T>]) -> String {
    let mut out = String::new();
    let _ =
        writeln!(out, "{:<6} {:<8} {:>7} {:>10} {:>10} {:>10}", "player", "plane", "frames", "mean", "max", "mean_cm");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<6} {:<8} {:>7} {:>10.3} {:>10.3} {:>10.2}",
            r.player.as_str(),
            format!("{:?}", r.plane).to_lowercase(),
            r.per_frame.len(),
            r.mean_px.to_f64_lossy(),
            r.max_px.to_f64_lossy(),
            r.mean_cm.to_f64_lossy()
        );
    }
    out
}

/// Error-versus-frame plot, one polyline per report.
pub fn error_curve_svg<T: Scalar>(reports: &[ErrorReport<T>]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 300.0;
    const PAD: f64 = 40.0;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let frames = reports.iter().flat_map(|r| r.per_frame.iter().map(|e| e.0));
    let (f0, f1) = frames.fold((u64::MAX, 0u64), |(lo, hi), f| (lo.min(f), hi.max(f)));
    let (f0, f1) = if f0 > f1 { (0, 1) } else { (f0, f1.max(f0 + 1)) };
    let ymax =
        reports.iter().flat_map(|r| r.per_frame.iter().map(|e| e.1.to_f64_lossy())).fold(0.0f64, f64::max).max(1e-9);
    let sx = |f: u64| PAD + (f - f0) as f64 / (f1 - f0) as f64 * (W - 2.0 * PAD);
    let sy = |e: f64| H - PAD - e / ymax * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD} {PAD} L{PAD} {y0} L{x1} {y0}" fill="none" stroke="black" stroke-width="1"/>"#,
        y0 = H - PAD,
        x1 = W - PAD
    );
    let _ = writeln!(svg, r#"<text x="{PAD}" y="{}" font-size="12">frame {f0}</text>"#, H - PAD + 16.0);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="end">frame {f1}</text>"#,
        W - PAD,
        H - PAD + 16.0
    );
    let unit = reports.first().map_or("px", |r| r.unit);
    let _ = writeln!(svg, r#"<text x="{PAD}" y="{}" font-size="12">{ymax:.3} {unit}</text>"#, PAD - 6.0);
    for (i, r) in reports.iter().enumerate() {
        let pts: Vec<String> =
            r.per_frame.iter().map(|(f, e)| format!("{:.2},{:.2}", sx(*f), sy(e.to_f64_lossy()))).collect();
        let color = colors[i % colors.len()];
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1"><title>{} ({:?})</title></polyline>"#,
            pts.join(" "),
            r.player,
            r.plane
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}" text-anchor="end">{}</text>"#,
            W - PAD,
            PAD + 14.0 * i as f64,
            r.player
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(points: &[(u64, f64, f64)]) -> Track<f64> {
        Track {
            player: Player::Near,
            points: points
                .iter()
                .map(|&(f, x, y)| {
                    let p = Point2::new(x, y);
                    TrackPoint { frame_id: f, cam: p, world: p, source: Source::Detected }
                })
                .collect(),
        }
    }

    #[test]
    fn unit_conversion() {
        assert_eq!(px_to_cm(13.0, 2.5), 32.5);
        assert_eq!(px_to_cm(25.0, 2.5), 62.5);
        assert_eq!(px_to_cm(0.0, 2.5), 0.0);
    }

    #[test]
    fn identical_tracks_have_zero_error() {
        let t = track(&[(0, 1.0, 2.0), (1, 3.0, 4.0)]);
        let r = compare_trajectories(&t, &t, ComparisonPlane::Camera, 2.5).unwrap();
        assert!(r.per_frame.iter().all(|e| e.1 == 0.0));
        assert_eq!((r.mean_px, r.max_px, r.mean_cm), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_offset_error() {
        let gt = track(&[(0, 0.0, 0.0), (1, 10.0, 3.0), (2, -4.0, 7.5)]);
        let est = track(&[(0, 5.0, 12.0), (1, 15.0, 15.0), (2, 1.0, 19.5)]);
        let r = compare_trajectories(&est, &gt, ComparisonPlane::Camera, 2.5).unwrap();
        assert!(r.per_frame.iter().all(|e| e.1 == 13.0));
        assert_eq!(r.mean_px, 13.0);
        assert_eq!(r.mean_cm, 32.5);
    }

    #[test]
    fn only_common_frames_compared() {
        let gt = track(&[(1, 0.0, 0.0), (3, 0.0, 0.0)]);
        let est = track(&[(0, 9.0, 9.0), (1, 3.0, 4.0), (2, 9.0, 9.0)]);
        let r = compare_trajectories(&est, &gt, ComparisonPlane::Camera, 2.5).unwrap();
        assert_eq!(r.per_frame, vec![(1, 5.0)]);
        let disjoint = track(&[(7, 0.0, 0.0)]);
        assert_eq!(
            compare_trajectories(&disjoint, &gt, ComparisonPlane::Camera, 2.5),
            Err(EvalError::NoOverlap(Player::Near))
        );
    }

    #[test]
    fn planes_scale_consistently() {
        let gt = track(&[(0, 0.0, 0.0)]);
        let est = track(&[(0, 0.3, 0.4)]);
        let top = compare_trajectories(&est, &gt, ComparisonPlane::TopView, 2.5).unwrap();
        assert!((top.mean_px - 20.0).abs() < 1e-12);
        assert!((top.mean_cm - 50.0).abs() < 1e-12);
        let world = compare_trajectories(&est, &gt, ComparisonPlane::World, 2.5).unwrap();
        assert!((world.mean_px - 0.5).abs() < 1e-15);
        assert!((world.mean_cm - 50.0).abs() < 1e-12);
        assert_eq!(world.unit, "m");
    }

    #[test]
    fn ground_truth_csv() {
        let text = "frame,player,x,y\n0,near,1.5,2\n0,far,3,4\n";
        let rows = parse_ground_truth::<f64>(text).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].player, Player::Far);
        let again = parse_ground_truth::<f64>(&ground_truth_to_csv(&rows)).unwrap();
        assert_eq!(again, rows);
        assert!(parse_ground_truth::<f64>("0,near,1\n").is_err());
        let t = ground_truth_track(&rows, Player::Far, Some(&Homography::translation(1.0, 0.0))).unwrap();
        assert!((t.points[0].cam.x - 4.0).abs() < 1e-12);
    }

    #[test]
    fn svg_and_table_render() {
        let gt = track(&[(0, 0.0, 0.0), (1, 0.0, 0.0)]);
        let est = track(&[(0, 1.0, 0.0), (1, 2.0, 0.0)]);
        let r = compare_trajectories(&est, &gt, ComparisonPlane::Camera, 2.5).unwrap();
        let svg = error_curve_svg(std::slice::from_ref(&r));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polyline"));
        let table = reports_to_table(&[r]);
        assert!(table.contains("near"));
        assert!(table.contains("1.500"));
    }
}
