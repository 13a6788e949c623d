//! Detector and pose-network outputs, and their JSONL file formats.
//!
//! `detections.jsonl`, one frame per line:
//!
//! ```text
//! {"frame": 0, "image_size": [852, 472], "detections": [{"bbox": [x, y, w, h], "score": 0.97, "class": "person"}]}
//! ```
//!
//! `poses.jsonl`, one (frame, player) pose per line; `keypoints3d` may be
//! `null` for a frame where lifting failed:
//!
//! ```text
//! {"frame": 0, "player": "near", "keypoints3d": [[x, y, z], ...17], "keypoints2d": [[x, y, c], ...17]}
//! ```
//!
//! Keypoints follow the 17-point COCO order in [`COCO_KEYPOINTS`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;
use crate::scalar::Scalar;

pub const NUM_KEYPOINTS: usize = 17;

pub const COCO_KEYPOINTS: [&str; NUM_KEYPOINTS] = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate frame {frame}")]
    DuplicateFrame { line: usize, frame: u64 },
    #[error("line {line}: frame {frame} follows frame {previous}")]
    NonMonotonicFrameIds { line: usize, frame: u64, previous: u64 },
}

impl ModelError {
    fn parse(line: usize, msg: impl Into<String>) -> Self {
        Self::Parse { line, msg: msg.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Near,
    Far,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::Near, Player::Far];

    pub fn index(self) -> usize {
        match self {
            Player::Near => 0,
            Player::Far => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Player::Near => "near",
            Player::Far => "far",
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Player {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "near" => Ok(Player::Near),
            "far" => Ok(Player::Far),
            other => Err(format!("unknown player {other:?} (expected near or far)")),
        }
    }
}

/// Whether a value came from the detector or was filled in from neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Detected,
    Interpolated,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Detected => "detected",
            Source::Interpolated => "interpolated",
        }
    }
}

impl std::str::FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "detected" => Ok(Source::Detected),
            "interpolated" => Ok(Source::Interpolated),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

/// Axis-aligned box in pixels; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox<T> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(x: T, y: T, w: T, h: T) -> Self {
        Self { x, y, w, h }
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > T::zero() && self.h > T::zero()
    }

    pub fn right(&self) -> T {
        self.x + self.w
    }

    pub fn bottom(&self) -> T {
        self.y + self.h
    }

    /// Bottom-center of the box, where the person touches the ground plane.
    pub fn foot_point(&self) -> Point2<T> {
        Point2::new(self.x + self.w / T::lit(2.0), self.y + self.h)
    }

    /// Clips the box to `[0, width] × [0, height]`. Returns `None` when
    /// nothing of it remains. Coordinates are untouched when no clipping is
    /// needed.
    pub fn clamp_to(&self, size: ImageSize<T>) -> Option<(Self, bool)> {
        let z = T::zero();
        let inside = self.x >= z && self.y >= z && self.right() <= size.width && self.bottom() <= size.height;
        if inside {
            return Some((*self, false));
        }
        let x0 = self.x.max(z);
        let y0 = self.y.max(z);
        let x1 = self.right().min(size.width);
        let y1 = self.bottom().min(size.height);
        (x1 > x0 && y1 > y0).then(|| (Self::new(x0, y0, x1 - x0, y1 - y0), true))
    }
}

pub fn foot_point<T: Scalar>(b: &BBox<T>) -> Point2<T> {
    b.foot_point()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSize<T> {
    pub width: T,
    pub height: T,
}

impl<T: Scalar> ImageSize<T> {
    pub fn new(width: T, height: T) -> Self {
        Self { width, height }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T> {
    pub bbox: BBox<T>,
    pub score: T,
    pub class_label: String,
}

impl<T: Scalar> Detection<T> {
    pub fn foot_point(&self) -> Point2<T> {
        self.bbox.foot_point()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections<T> {
    pub frame_id: u64,
    pub detections: Vec<Detection<T>>,
    pub image_size: ImageSize<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose3D<T> {
    pub frame_id: u64,
    pub keypoints: [[T; 3]; NUM_KEYPOINTS],
    pub valid: bool,
}

impl<T: Scalar> Pose3D<T> {
    pub fn new(frame_id: u64, keypoints: [[T; 3]; NUM_KEYPOINTS]) -> Self {
        let valid = keypoints.iter().flatten().all(|v| v.is_finite());
        Self { frame_id, keypoints, valid }
    }

    /// Placeholder for a frame whose pose is missing.
    pub fn missing(frame_id: u64) -> Self {
        Self { frame_id, keypoints: [[T::zero(); 3]; NUM_KEYPOINTS], valid: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose2D<T> {
    pub frame_id: u64,
    pub keypoints: [[T; 2]; NUM_KEYPOINTS],
    pub confidence: [T; NUM_KEYPOINTS],
}

/// Poses of one player, strictly increasing in frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerPoses<T> {
    pub player: Player,
    pub poses: Vec<Pose3D<T>>,
    /// Optional 2D keypoints by frame, kept so files round-trip.
    pub poses_2d: BTreeMap<u64, Pose2D<T>>,
    /// Per-frame provenance when the file carried a `source` field.
    pub sources: BTreeMap<u64, Source>,
}

impl<T> PlayerPoses<T> {
    pub fn new(player: Player) -> Self {
        Self { player, poses: Vec::new(), poses_2d: BTreeMap::new(), sources: BTreeMap::new() }
    }
}

// ---- wire records ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
struct DetectionRecord<T> {
    bbox: [T; 4],
    score: T,
    #[serde(rename = "class")]
    class_label: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
struct FrameRecord<T> {
    frame: u64,
    image_size: [T; 2],
    detections: Vec<DetectionRecord<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
struct PoseRecord<T> {
    frame: u64,
    player: Player,
    keypoints3d: Option<Vec<[T; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keypoints2d: Option<Vec<[T; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<Source>,
}

fn read_file(path: &Path) -> Result<String, ModelError> {
    std::fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })
}

fn json_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

fn check_order(line: usize, frame: u64, previous: Option<u64>) -> Result<(), ModelError> {
    match previous {
        Some(prev) if frame == prev => Err(ModelError::DuplicateFrame { line, frame }),
        Some(prev) if frame < prev => Err(ModelError::NonMonotonicFrameIds { line, frame, previous: prev }),
        _ => Ok(()),
    }
}

/// Parses detection JSONL. Boxes are clipped to the image; scores outside
/// `[0, 1]` and boxes with no area inside the image are rejected.
pub fn parse_detections<T: Scalar>(text: &str) -> Result<Vec<FrameDetections<T>>, ModelError> {
    let mut frames: Vec<FrameDetections<T>> = Vec::new();
    for (line, raw) in json_lines(text) {
        let record: FrameRecord<T> = serde_json::from_str(raw).map_err(|e| ModelError::parse(line, e.to_string()))?;
        check_order(line, record.frame, frames.last().map(|f| f.frame_id))?;
        let [width, height] = record.image_size;
        let image_size = ImageSize::new(width, height);
        if !(width > T::zero() && height > T::zero() && width.is_finite() && height.is_finite()) {
            return Err(ModelError::parse(line, "image_size must be positive"));
        }
        let mut detections = Vec::with_capacity(record.detections.len());
        for (k, d) in record.detections.into_iter().enumerate() {
            if !(d.score >= T::zero() && d.score <= T::one()) {
                return Err(ModelError::parse(line, format!("detection {k}: score {} outside [0, 1]", d.score)));
            }
            let [x, y, w, h] = d.bbox;
            let bbox = BBox::new(x, y, w, h);
            if !bbox.is_valid() {
                return Err(ModelError::parse(line, format!("detection {k}: bbox needs finite values and w, h > 0")));
            }
            let (bbox, _) = bbox
                .clamp_to(image_size)
                .ok_or_else(|| ModelError::parse(line, format!("detection {k}: bbox lies outside the image")))?;
            detections.push(Detection { bbox, score: d.score, class_label: d.class_label });
        }
        frames.push(FrameDetections { frame_id: record.frame, detections, image_size });
    }
    Ok(frames)
}

pub fn load_detections<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<FrameDetections<T>>, ModelError> {
    parse_detections(&read_file(path.as_ref())?)
}

pub fn detections_to_jsonl<T: Scalar>(frames: &[FrameDetections<T>]) -> String {
    let mut out = String::new();
    for f in frames {
        let record = FrameRecord {
            frame: f.frame_id,
            image_size: [f.image_size.width, f.image_size.height],
            detections: f
                .detections
                .iter()
                .map(|d| DetectionRecord {
                    bbox: [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h],
                    score: d.score,
                    class_label: d.class_label.clone(),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("detection record serializes"));
        out.push('\n');
    }
    out
}

/// Parses pose JSONL into one stream per player, in [`Player::BOTH`] order
/// (players absent from the file are omitted).
pub fn parse_poses<T: Scalar>(text: &str) -> Result<Vec<PlayerPoses<T>>, ModelError> {
    let mut streams: BTreeMap<Player, PlayerPoses<T>> = BTreeMap::new();
    for (line, raw) in json_lines(text) {
        let record: PoseRecord<T> = serde_json::from_str(raw).map_err(|e| ModelError::parse(line, e.to_string()))?;
        let stream = streams.entry(record.player).or_insert_with(|| PlayerPoses::new(record.player));
        check_order(line, record.frame, stream.poses.last().map(|p| p.frame_id))?;
        let pose = match record.keypoints3d {
            None => Pose3D::missing(record.frame),
            Some(kps) => {
                let keypoints: [[T; 3]; NUM_KEYPOINTS] = kps.try_into().map_err(|v: Vec<_>| {
                    ModelError::parse(line, format!("keypoints3d has {} entries, expected {NUM_KEYPOINTS}", v.len()))
                })?;
                Pose3D::new(record.frame, keypoints)
            }
        };
        if let Some(kps) = record.keypoints2d {
            let triples: [[T; 3]; NUM_KEYPOINTS] = kps.try_into().map_err(|v: Vec<_>| {
                ModelError::parse(line, format!("keypoints2d has {} entries, expected {NUM_KEYPOINTS}", v.len()))
            })?;
            if triples.iter().any(|t| !(t[2] >= T::zero() && t[2] <= T::one())) {
                return Err(ModelError::parse(line, "keypoints2d confidence outside [0, 1]"));
            }
            stream.poses_2d.insert(
                record.frame,
                Pose2D {
                    frame_id: record.frame,
                    keypoints: triples.map(|t| [t[0], t[1]]),
                    confidence: triples.map(|t| t[2]),
                },
            );
        }
        if let Some(source) = record.source {
            stream.sources.insert(record.frame, source);
        }
        stream.poses.push(pose);
    }
    Ok(streams.into_values().collect())
}

pub fn load_poses<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<PlayerPoses<T>>, ModelError> {
    parse_poses(&read_file(path.as_ref())?)
}

/// Serializes poses frame-major (all players of frame 0, then frame 1, ...).
/// Invalid poses are written with `"keypoints3d": null`.
pub fn poses_to_jsonl<T: Scalar>(streams: &[PlayerPoses<T>]) -> String {
    let mut rows: Vec<(u64, Player, String)> = Vec::new();
    for s in streams {
        for p in &s.poses {
            let record = PoseRecord {
                frame: p.frame_id,
                player: s.player,
                keypoints3d: p.valid.then(|| p.keypoints.to_vec()),
                keypoints2d: s
                    .poses_2d
                    .get(&p.frame_id)
                    .map(|q| q.keypoints.iter().zip(&q.confidence).map(|(k, &c)| [k[0], k[1], c]).collect()),
                source: s.sources.get(&p.frame_id).copied(),
            };
            rows.push((p.frame_id, s.player, serde_json::to_string(&record).expect("pose record serializes")));
        }
    }
    rows.sort_by_key(|r| (r.0, r.1));
    rows.into_iter()
        .map(|(_, _, mut l)| {
            l.push('\n');
            l
        })
        .collect()
}
