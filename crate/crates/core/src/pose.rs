//! Pose post-processing: crop expansion around detections, outlier-frame
//! detection on lifted 3D skeletons, and recursive keyframe inbetweening.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{BBox, ImageSize, Player, PlayerPoses, Pose3D, Source, COCO_KEYPOINTS, NUM_KEYPOINTS};
use crate::scalar::Scalar;

pub const DEFAULT_MARGIN: f64 = 30.0;
pub const DEFAULT_VMAX: f64 = 0.15;
pub const NUM_FEATURES: usize = 3 * NUM_KEYPOINTS;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("fewer than two clean keyframes remain")]
    AllFramesOutliers,
    #[error("gap at frame {frame} touches the sequence boundary and cannot be filled")]
    UnfillableGap { frame: u64 },
    #[error("pose at frame {frame} is not valid")]
    InvalidPose { frame: u64 },
    #[error("vmax must be positive")]
    InvalidVmax,
    #[error("outlier frame {frame} is not part of the sequence")]
    UnknownFrame { frame: u64 },
}

/// Image patch handed to the pose network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropRegion<T> {
    pub bbox: BBox<T>,
    pub clamped: bool,
}

/// Pushes every side of `b` outward by `margin`, then clips to the image.
pub fn expand_bbox<T: Scalar>(b: &BBox<T>, margin: T, image_size: ImageSize<T>) -> CropRegion<T> {
    let grown = BBox::new(b.x - margin, b.y - margin, b.w + margin + margin, b.h + margin + margin);
    match grown.clamp_to(image_size) {
        Some((bbox, clamped)) => CropRegion { bbox, clamped },
        // only reachable when `b` itself lies outside the image
        None => CropRegion { bbox: *b, clamped: true },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence<T> {
    pub player: Player,
    pub poses: Vec<Pose3D<T>>,
    pub outliers: BTreeSet<u64>,
    /// Frames whose keypoints were filled by interpolation.
    pub interpolated: BTreeSet<u64>,
}

impl<T: Scalar> PoseSequence<T> {
    pub fn new(player: Player, poses: Vec<Pose3D<T>>) -> Self {
        Self { player, poses, outliers: BTreeSet::new(), interpolated: BTreeSet::new() }
    }

    pub fn from_player_poses(stream: &PlayerPoses<T>) -> Self {
        let interpolated =
            stream.sources.iter().filter(|(_, s)| **s == Source::Interpolated).map(|(f, _)| *f).collect();
        Self { interpolated, ..Self::new(stream.player, stream.poses.clone()) }
    }

    /// Converts back to the file representation, tagging every frame's source.
    pub fn to_player_poses(&self) -> PlayerPoses<T> {
        let mut out = PlayerPoses::new(self.player);
        out.poses = self.poses.clone();
        out.sources = self
            .poses
            .iter()
            .map(|p| {
                let s = if self.interpolated.contains(&p.frame_id) { Source::Interpolated } else { Source::Detected };
                (p.frame_id, s)
            })
            .collect::<BTreeMap<_, _>>();
        out
    }
}

fn keypoint_distance<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> T {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn frame_gap<T: Scalar>(from: u64, to: u64) -> T {
    T::from_u64(to - from).expect("frame gap fits in scalar")
}

/// True when some keypoint moves faster than `vmax` both into and out of `mid`.
fn is_spike<T: Scalar>(prev: &Pose3D<T>, mid: &Pose3D<T>, next: &Pose3D<T>, vmax: T) -> bool {
    let into = vmax * frame_gap::<T>(prev.frame_id, mid.frame_id);
    let out = vmax * frame_gap::<T>(mid.frame_id, next.frame_id);
    (0..NUM_KEYPOINTS).any(|k| {
        keypoint_distance(&mid.keypoints[k], &prev.keypoints[k]) > into
            && keypoint_distance(&next.keypoints[k], &mid.keypoints[k]) > out
    })
}

/// Flags frames that are invalid or show improbable keypoint movement
/// relative to both temporal neighbors.
///
/// Scans left to right. The previous neighbor is the nearest frame already
/// accepted as clean; the next neighbor is the nearest following valid frame.
/// The first and last valid frames have only one neighbor and are never
/// flagged as spikes.
pub fn detect_outlier_frames<T: Scalar>(seq: &PoseSequence<T>, vmax: T) -> Result<BTreeSet<u64>, PoseError> {
    if !(vmax > T::zero()) {
        return Err(PoseError::InvalidVmax);
    }
    let poses = &seq.poses;
    let mut flagged = BTreeSet::new();
    let mut last_clean: Option<usize> = None;
    let mut clean = 0usize;
    for (i, pose) in poses.iter().enumerate() {
        if !pose.valid {
            flagged.insert(pose.frame_id);
            continue;
        }
        let next = poses[i + 1..].iter().find(|p| p.valid);
        let spike = match (last_clean, next) {
            (Some(a), Some(next)) => is_spike(&poses[a], pose, next, vmax),
            _ => false,
        };
        if spike {
            flagged.insert(pose.frame_id);
        } else {
            last_clean = Some(i);
            clean += 1;
        }
    }
    if clean < 2 {
        return Err(PoseError::AllFramesOutliers);
    }
    Ok(flagged)
}

/// Drops leading and trailing frames that are flagged or invalid so both
/// ends of the sequence are keyframes.
pub fn trim_to_keyframes<T: Scalar>(seq: &PoseSequence<T>, outliers: &BTreeSet<u64>) -> PoseSequence<T> {
    let good = |p: &Pose3D<T>| p.valid && !outliers.contains(&p.frame_id);
    let start = seq.poses.iter().position(good).unwrap_or(seq.poses.len());
    let end = seq.poses.iter().rposition(good).map_or(start, |e| e + 1);
    let poses = seq.poses[start..end.max(start)].to_vec();
    let kept: BTreeSet<u64> = poses.iter().map(|p| p.frame_id).collect();
    PoseSequence {
        player: seq.player,
        outliers: seq.outliers.intersection(&kept).copied().collect(),
        interpolated: seq.interpolated.intersection(&kept).copied().collect(),
        poses,
    }
}

/// Replaces every outlier frame (and every frame id missing from the
/// sequence) by recursive-midpoint inbetweening between clean keyframes.
///
/// Within a gap bounded by keyframes `ta` and `tb`, frame `⌊(ta+tb)/2⌋` is
/// filled first with the time-weighted value
/// `pa + (t − ta)/(tb − ta) · (pb − pa)`, becomes a keyframe, and both halves
/// are filled the same way. Keyframes are never modified.
pub fn inbetween<T: Scalar>(seq: &PoseSequence<T>, outliers: &BTreeSet<u64>) -> Result<PoseSequence<T>, PoseError> {
    let present: BTreeSet<u64> = seq.poses.iter().map(|p| p.frame_id).collect();
    if let Some(&frame) = outliers.iter().find(|f| !present.contains(f)) {
        return Err(PoseError::UnknownFrame { frame });
    }
    let (first, last) = match (seq.poses.first(), seq.poses.last()) {
        (Some(a), Some(b)) => (a.frame_id, b.frame_id),
        _ => return Err(PoseError::AllFramesOutliers),
    };

    let by_frame: BTreeMap<u64, &Pose3D<T>> = seq.poses.iter().map(|p| (p.frame_id, p)).collect();
    let mut slots: Vec<Option<Pose3D<T>>> = (first..=last)
        .map(|t| by_frame.get(&t).filter(|p| p.valid && !outliers.contains(&t)).map(|p| (*p).clone()))
        .collect();
    if slots.first().is_some_and(|s| s.is_none()) {
        return Err(PoseError::UnfillableGap { frame: first });
    }
    if slots.last().is_some_and(|s| s.is_none()) {
        return Err(PoseError::UnfillableGap { frame: last });
    }

    let keyframes: Vec<usize> = slots.iter().enumerate().filter(|(_, s)| s.is_some()).map(|(i, _)| i).collect();
    let mut interpolated = seq.interpolated.clone();
    for pair in keyframes.windows(2) {
        if pair[1] - pair[0] > 1 {
            fill_midpoints(&mut slots, pair[0], pair[1], first);
            interpolated.extend((pair[0] + 1..pair[1]).map(|i| first + i as u64));
        }
    }

    Ok(PoseSequence {
        player: seq.player,
        poses: slots.into_iter().map(|s| s.expect("every slot filled")).collect(),
        outliers: BTreeSet::new(),
        interpolated,
    })
}

fn fill_midpoints<T: Scalar>(slots: &mut [Option<Pose3D<T>>], a: usize, b: usize, first: u64) {
    if b - a < 2 {
        return;
    }
    let mid = a + (b - a) / 2;
    let frac = T::from_usize(mid - a).expect("index fits") / T::from_usize(b - a).expect("index fits");
    let pa = slots[a].as_ref().expect("left keyframe");
    let pb = slots[b].as_ref().expect("right keyframe");
    let mut keypoints = pa.keypoints;
    for (k, kp) in keypoints.iter_mut().enumerate() {
        for (c, v) in kp.iter_mut().enumerate() {
            *v = pa.keypoints[k][c] + frac * (pb.keypoints[k][c] - pa.keypoints[k][c]);
        }
    }
    slots[mid] = Some(Pose3D { frame_id: first + mid as u64, keypoints, valid: true });
    fill_midpoints(slots, a, mid, first);
    fill_midpoints(slots, mid, b, first);
}

/// Detect, trim to keyframes, inbetween.
pub fn repair<T: Scalar>(seq: &PoseSequence<T>, vmax: T) -> Result<PoseSequence<T>, PoseError> {
    let outliers = detect_outlier_frames(seq, vmax)?;
    let trimmed = trim_to_keyframes(seq, &outliers);
    inbetween(&trimmed, &outliers.intersection(&trimmed.poses.iter().map(|p| p.frame_id).collect()).copied().collect())
}

/// The 51 coordinates of a pose: x, y, z of each keypoint in COCO order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector<T> {
    pub values: [T; NUM_FEATURES],
}

impl<T: Scalar> FeatureVector<T> {
    pub fn unflatten(&self, frame_id: u64) -> Pose3D<T> {
        let mut keypoints = [[T::zero(); 3]; NUM_KEYPOINTS];
        for (k, kp) in keypoints.iter_mut().enumerate() {
            kp.copy_from_slice(&self.values[3 * k..3 * k + 3]);
        }
        Pose3D::new(frame_id, keypoints)
    }
}

pub fn pose_features<T: Scalar>(p: &Pose3D<T>) -> Result<FeatureVector<T>, PoseError> {
    if !p.valid {
        return Err(PoseError::InvalidPose { frame: p.frame_id });
    }
    let mut values = [T::zero(); NUM_FEATURES];
    for (dst, src) in values.iter_mut().zip(p.keypoints.iter().flatten()) {
        *dst = *src;
    }
    Ok(FeatureVector { values })
}

pub fn features_csv_header() -> String {
    let mut cols = vec!["frame".to_string()];
    for name in COCO_KEYPOINTS {
        for axis in ["x", "y", "z"] {
            cols.push(format!("{name}_{axis}"));
        }
    }
    cols.join(",")
}

/// One row per valid pose: frame id then the 51 feature values.
pub fn features_to_csv<T: Scalar>(seq: &PoseSequence<T>) -> Result<String, PoseError> {
    let mut out = features_csv_header();
    out.push('\n');
    for p in &seq.poses {
        let f = pose_features(p)?;
        out.push_str(&p.frame_id.to_string());
        for v in f.values {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    Ok(out)
}
