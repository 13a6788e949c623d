//! Synthetic badminton scene with known ground truth.
//!
//! Two players wander inside their own half of the court; their foot points
//! are projected into a virtual camera and wrapped in person-sized boxes,
//! optionally with jitter, dropped detections, false positives and pose
//! spikes. All randomness comes from xoshiro256++ seeded with
//! `SceneConfig::seed`; trajectories, detections and poses each draw from
//! their own jump-separated stream so one kind of noise never perturbs
//! another.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::GroundTruthRow;
use crate::geometry::{estimate_homography, Correspondence, Homography, Point2};
use crate::model::{
    detections_to_jsonl, poses_to_jsonl, BBox, Detection, FrameDetections, ImageSize, Player, PlayerPoses, Pose3D,
    NUM_KEYPOINTS,
};
use crate::pose::PoseSequence;

/// Singles court, 20 ft × 44 ft, in meters.
pub const COURT_WIDTH_M: f64 = 6.096;
pub const COURT_LENGTH_M: f64 = 13.411;
pub const IMAGE_WIDTH: f64 = 852.0;
pub const IMAGE_HEIGHT: f64 = 472.0;

/// Court corners in the default camera view, matching `court_world` order.
const DEFAULT_CAMERA_CORNERS: [(f64, f64); 4] = [(176.0, 440.0), (676.0, 440.0), (566.0, 120.0), (286.0, 120.0)];

/// Fraction of each half kept clear of the lines when placing waypoints.
const HALF_MARGIN: f64 = 0.05;
const BOX_HEIGHT_RANGE: (f64, f64) = (100.0, 140.0);
const BOX_ASPECT: f64 = 0.45;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub seed: u64,
    pub n_frames: u64,
    /// Court corners in meters: near-left, near-right, far-right, far-left.
    pub court_world: [Point2<f64>; 4],
    /// Maps court meters to camera pixels.
    pub camera_h: Homography<f64>,
    pub image_size: [f64; 2],
    pub jitter_sigma: f64,
    pub miss_rate: f64,
    pub fp_rate: f64,
    /// Per-frame probability of an extra detection off the court.
    pub spectator_rate: f64,
    pub pose_spike_rate: f64,
    pub pose_spike_magnitude: f64,
    /// Upper bound on player speed, meters per frame.
    pub max_speed: f64,
}

pub fn default_court_world() -> [Point2<f64>; 4] {
    [
        Point2::new(0.0, 0.0),
        Point2::new(COURT_WIDTH_M, 0.0),
        Point2::new(COURT_WIDTH_M, COURT_LENGTH_M),
        Point2::new(0.0, COURT_LENGTH_M),
    ]
}

pub fn default_camera() -> Homography<f64> {
    let pairs: Vec<_> = default_court_world()
        .iter()
        .zip(DEFAULT_CAMERA_CORNERS)
        .map(|(w, (x, y))| Correspondence::new(*w, Point2::new(x, y)))
        .collect();
    estimate_homography(&pairs).expect("default camera corners are in general position")
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_frames: 300,
            court_world: default_court_world(),
            camera_h: default_camera(),
            image_size: [IMAGE_WIDTH, IMAGE_HEIGHT],
            jitter_sigma: 0.0,
            miss_rate: 0.0,
            fp_rate: 0.0,
            spectator_rate: 0.0,
            pose_spike_rate: 0.0,
            pose_spike_magnitude: 0.5,
            max_speed: 0.05,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_frames < 2 {
            return bad(format!("n_frames must be at least 2, got {}", self.n_frames));
        }
        for (name, rate) in [
            ("miss_rate", self.miss_rate),
            ("fp_rate", self.fp_rate),
            ("spectator_rate", self.spectator_rate),
            ("pose_spike_rate", self.pose_spike_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return bad(format!("{name} must lie in [0, 1], got {rate}"));
            }
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return bad("jitter_sigma must be finite and nonnegative".into());
        }
        if !(self.pose_spike_magnitude >= 0.0 && self.pose_spike_magnitude.is_finite()) {
            return bad("pose_spike_magnitude must be finite and nonnegative".into());
        }
        if !(self.max_speed > 0.0 && self.max_speed.is_finite()) {
            return bad("max_speed must be positive".into());
        }
        let [w, h] = self.image_size;
        if !(w > 0.0 && h > 0.0) {
            return bad("image_size must be positive".into());
        }
        let c = &self.court_world;
        if c.iter().any(|p| !p.is_finite()) {
            return bad("court_world must be finite".into());
        }
        let turns: Vec<f64> = (0..4)
            .map(|i| {
                let (a, b, d) = (c[i], c[(i + 1) % 4], c[(i + 2) % 4]);
                (b.x - a.x) * (d.y - b.y) - (b.y - a.y) * (d.x - b.x)
            })
            .collect();
        if !(turns.iter().all(|t| *t > 0.0) || turns.iter().all(|t| *t < 0.0)) {
            return bad("court_world must be a convex quadrilateral".into());
        }
        for p in c {
            let q = self
                .camera_h
                .apply(*p)
                .map_err(|e| SynthError::InvalidConfig(format!("camera_h cannot project the court: {e}")))?;
            if !(q.x >= 0.0 && q.y >= 0.0 && q.x <= w && q.y <= h) {
                return bad(format!("court corner ({}, {}) projects outside the image", p.x, p.y));
            }
        }
        Ok(())
    }

    /// Court point at fractional coordinates: `u` across, `v` from the
    /// near baseline (corners 0–1) to the far one (corners 3–2).
    fn court_point(&self, u: f64, v: f64) -> Point2<f64> {
        let c = &self.court_world;
        let near = c[0].lerp(&c[1], u);
        let far = c[3].lerp(&c[2], u);
        near.lerp(&far, v)
    }

    /// Court corners in the camera image.
    pub fn court_camera(&self) -> Result<Vec<Point2<f64>>, SynthError> {
        self.court_world
            .iter()
            .map(|p| self.camera_h.apply(*p).map_err(|e| SynthError::InvalidConfig(e.to_string())))
            .collect()
    }

    /// Calibration file text mapping the projected court corners to meters.
    pub fn calibration_text(&self) -> Result<String, SynthError> {
        let mut out = String::from("# cam_x cam_y world_x world_y\n");
        for (cam, world) in self.court_camera()?.iter().zip(&self.court_world) {
            out.push_str(&format!("{} {} {} {}\n", cam.x, cam.y, world.x, world.y));
        }
        Ok(out)
    }

    pub fn court_polygon_text(&self) -> Result<String, SynthError> {
        let mut out = String::from("# court outline in camera pixels\n");
        for p in self.court_camera()? {
            out.push_str(&format!("{} {}\n", p.x, p.y));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Per-frame world positions, indexed by [`Player::index`].
    pub world_tracks: [Vec<Point2<f64>>; 2],
    /// Clean poses, indexed by [`Player::index`].
    pub poses: [PoseSequence<f64>; 2],
    /// Frames that received a pose spike, indexed by [`Player::index`].
    pub injected_outlier_frames: [BTreeSet<u64>; 2],
    /// Frames at which a player's detection was dropped.
    pub missed_frames: [BTreeSet<u64>; 2],
}

impl GroundTruth {
    pub fn rows(&self) -> Vec<GroundTruthRow<f64>> {
        let n = self.world_tracks[0].len();
        let mut rows = Vec::with_capacity(2 * n);
        for t in 0..n {
            for player in Player::BOTH {
                rows.push(GroundTruthRow { frame_id: t as u64, player, world: self.world_tracks[player.index()][t] });
            }
        }
        rows
    }

    pub fn outliers_csv(&self) -> String {
        let mut out = String::from("frame,player\n");
        let mut all: Vec<(u64, Player)> = Player::BOTH
            .iter()
            .flat_map(|p| self.injected_outlier_frames[p.index()].iter().map(move |f| (*f, *p)))
            .collect();
        all.sort();
        for (f, p) in all {
            out.push_str(&format!("{f},{p}\n"));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub truth: GroundTruth,
    pub detections: Vec<FrameDetections<f64>>,
    /// Spiked poses as written to `poses.jsonl`, indexed by [`Player::index`].
    pub poses: [PlayerPoses<f64>; 2],
    pub detections_jsonl: String,
    pub poses_jsonl: String,
}

/// Rest skeleton in model units (y up, feet at 0), COCO order.
const REST_POSE: [[f64; 3]; NUM_KEYPOINTS] = [
    [0.0, 1.62, 0.06],
    [0.03, 1.66, 0.05],
    [-0.03, 1.66, 0.05],
    [0.07, 1.63, 0.0],
    [-0.07, 1.63, 0.0],
    [0.18, 1.42, 0.0],
    [-0.18, 1.42, 0.0],
    [0.24, 1.16, 0.02],
    [-0.24, 1.16, 0.02],
    [0.27, 0.92, 0.06],
    [-0.27, 0.92, 0.06],
    [0.1, 0.95, 0.0],
    [-0.1, 0.95, 0.0],
    [0.11, 0.5, 0.03],
    [-0.11, 0.5, 0.03],
    [0.12, 0.08, 0.0],
    [-0.12, 0.08, 0.0],
];

/// Swing amplitude per keypoint; only limbs move.
const SWING: [f64; NUM_KEYPOINTS] =
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.08, 0.08, 0.15, 0.15, 0.0, 0.0, 0.06, 0.06, 0.1, 0.1];
const SWING_PERIOD: f64 = 50.0;

fn streams(seed: u64) -> [Xoshiro256PlusPlus; 3] {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let a = rng.clone();
    rng.jump();
    let b = rng.clone();
    rng.jump();
    [a, b, rng]
}

fn random_waypoint_track(cfg: &SceneConfig, v_range: (f64, f64), rng: &mut Xoshiro256PlusPlus) -> Vec<Point2<f64>> {
    let (u0, u1) = (HALF_MARGIN, 1.0 - HALF_MARGIN);
    let sample = |rng: &mut Xoshiro256PlusPlus| {
        cfg.court_point(rng.random_range(u0..u1), rng.random_range(v_range.0..v_range.1))
    };
    let mut pos = sample(rng);
    let mut target = sample(rng);
    let mut speed = cfg.max_speed * rng.random_range(0.3..1.0);
    let mut out = Vec::with_capacity(cfg.n_frames as usize);
    for _ in 0..cfg.n_frames {
        out.push(pos);
        let d = pos.distance(&target);
        if d <= speed {
            pos = target;
            target = sample(rng);
            speed = cfg.max_speed * rng.random_range(0.3..1.0);
        } else {
            pos = pos.lerp(&target, speed / d);
        }
    }
    out
}

/// Pixels per meter across the court at `world`, relative to the middle of
/// the near baseline.
fn depth_scale(cfg: &SceneConfig, world: Point2<f64>) -> f64 {
    let span = |p: Point2<f64>| {
        let a = cfg.camera_h.apply(p - Point2::new(0.5, 0.0));
        let b = cfg.camera_h.apply(p + Point2::new(0.5, 0.0));
        match (a, b) {
            (Ok(a), Ok(b)) => a.distance(&b),
            _ => 1.0,
        }
    };
    let reference = span(cfg.court_world[0].lerp(&cfg.court_world[1], 0.5));
    span(world) / reference
}

fn box_at(foot: Point2<f64>, height: f64) -> BBox<f64> {
    let w = BOX_ASPECT * height;
    BBox::new(foot.x - w / 2.0, foot.y - height, w, height)
}

fn clean_pose(frame: u64, phase: f64) -> Pose3D<f64> {
    let angle = 2.0 * std::f64::consts::PI * frame as f64 / SWING_PERIOD + phase;
    let mut keypoints = REST_POSE;
    for (k, kp) in keypoints.iter_mut().enumerate() {
        let side = if k % 2 == 1 { 1.0 } else { -1.0 };
        let a = SWING[k];
        kp[0] += 0.3 * a * (angle + side).sin();
        kp[1] += 0.5 * a * (angle * side).cos();
        kp[2] += a * (angle + side).sin();
    }
    Pose3D::new(frame, keypoints)
}

fn unit_vector(rng: &mut Xoshiro256PlusPlus) -> [f64; 3] {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let v: [f64; 3] = [normal.sample(rng), normal.sample(rng), normal.sample(rng)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return v.map(|c| c / n);
        }
    }
}

/// Generates ground truth plus detector- and pose-network-style inputs.
pub fn generate_scene(cfg: &SceneConfig) -> Result<Scene, SynthError> {
    cfg.validate()?;
    let [mut traj_rng, mut det_rng, mut pose_rng] = streams(cfg.seed);
    let n = cfg.n_frames;
    let last = n - 1;

    let half_a = random_waypoint_track(cfg, (HALF_MARGIN, 0.5 - HALF_MARGIN), &mut traj_rng);
    let half_b = random_waypoint_track(cfg, (0.5 + HALF_MARGIN, 1.0 - HALF_MARGIN), &mut traj_rng);
    let image_y = |p: Point2<f64>| cfg.camera_h.apply(p).map(|q| q.y).unwrap_or(0.0);
    // the player lower in the image is the near one
    let world_tracks = if image_y(half_a[0]) >= image_y(half_b[0]) { [half_a, half_b] } else { [half_b, half_a] };
    let heights = [
        traj_rng.random_range(BOX_HEIGHT_RANGE.0..BOX_HEIGHT_RANGE.1),
        traj_rng.random_range(BOX_HEIGHT_RANGE.0..BOX_HEIGHT_RANGE.1),
    ];

    let image_size = ImageSize::new(cfg.image_size[0], cfg.image_size[1]);
    let jitter = (cfg.jitter_sigma > 0.0).then(|| Normal::new(0.0, cfg.jitter_sigma).expect("valid sigma"));
    let project = |p: Point2<f64>| cfg.camera_h.apply(p).map_err(|e| SynthError::InvalidConfig(e.to_string()));
    let mut missed_frames = [BTreeSet::new(), BTreeSet::new()];
    let mut detections = Vec::with_capacity(n as usize);
    for t in 0..n {
        let mut dets = Vec::new();
        for player in Player::BOTH {
            let i = player.index();
            let world = world_tracks[i][t as usize];
            let dropped = det_rng.random::<f64>() < cfg.miss_rate;
            let (dx, dy) = match &jitter {
                Some(j) => (j.sample(&mut det_rng), j.sample(&mut det_rng)),
                None => (0.0, 0.0),
            };
            let score = det_rng.random_range(0.85..0.99);
            // first and last frames always see both players
            if dropped && t != 0 && t != last {
                missed_frames[i].insert(t);
                continue;
            }
            let foot = project(world)? + Point2::new(dx, dy);
            let height = heights[i] * depth_scale(cfg, world);
            dets.push(Detection { bbox: box_at(foot, height), score, class_label: "person".into() });
        }
        let fp = det_rng.random::<f64>() < cfg.fp_rate;
        let fp_world = cfg.court_point(det_rng.random::<f64>(), det_rng.random::<f64>());
        let fp_height = det_rng.random_range(BOX_HEIGHT_RANGE.0..BOX_HEIGHT_RANGE.1);
        let fp_score = det_rng.random_range(0.3..0.9);
        if fp && t != 0 {
            let foot = project(fp_world)?;
            let bbox = box_at(foot, fp_height * depth_scale(cfg, fp_world));
            if let Some((bbox, false)) = bbox.clamp_to(image_size) {
                dets.push(Detection { bbox, score: fp_score, class_label: "person".into() });
            }
        }
        let spectator = det_rng.random::<f64>() < cfg.spectator_rate;
        let side_u =
            if det_rng.random::<bool>() { det_rng.random_range(-0.4..-0.1) } else { det_rng.random_range(1.1..1.4) };
        let spectator_world = cfg.court_point(side_u, det_rng.random::<f64>());
        let spectator_score = det_rng.random_range(0.5..0.99);
        if spectator {
            if let Ok(foot) = project(spectator_world) {
                let bbox = box_at(foot, BOX_HEIGHT_RANGE.1 * depth_scale(cfg, spectator_world));
                if let Some((bbox, false)) = bbox.clamp_to(image_size) {
                    dets.push(Detection { bbox, score: spectator_score, class_label: "person".into() });
                }
            }
        }
        dets.shuffle(&mut det_rng);
        detections.push(FrameDetections { frame_id: t, detections: dets, image_size });
    }

    let mut clean = Vec::with_capacity(2);
    let mut spiked = Vec::with_capacity(2);
    let mut injected = [BTreeSet::new(), BTreeSet::new()];
    for player in Player::BOTH {
        let phase = pose_rng.random_range(0.0..2.0 * std::f64::consts::PI);
        let poses: Vec<Pose3D<f64>> = (0..n).map(|t| clean_pose(t, phase)).collect();
        let mut noisy = poses.clone();
        let mut previous_spiked = false;
        for t in 1..last {
            let hit = pose_rng.random::<f64>() < cfg.pose_spike_rate;
            let k = pose_rng.random_range(0..NUM_KEYPOINTS);
            let dir = unit_vector(&mut pose_rng);
            // spikes are isolated so each one has clean neighbors
            if hit && !previous_spiked && cfg.pose_spike_magnitude > 0.0 {
                for (c, d) in dir.iter().enumerate() {
                    noisy[t as usize].keypoints[k][c] += cfg.pose_spike_magnitude * d;
                }
                injected[player.index()].insert(t);
                previous_spiked = true;
            } else {
                previous_spiked = false;
            }
        }
        clean.push(PoseSequence::new(player, poses));
        let mut stream = PlayerPoses::new(player);
        stream.poses = noisy;
        spiked.push(stream);
    }

    let poses: [PlayerPoses<f64>; 2] = spiked.try_into().expect("two players");
    let detections_jsonl = detections_to_jsonl(&detections);
    let poses_jsonl = poses_to_jsonl(&poses);
    Ok(Scene {
        truth: GroundTruth {
            world_tracks,
            poses: clean.try_into().expect("two players"),
            injected_outlier_frames: injected,
            missed_frames,
        },
        detections,
        poses,
        detections_jsonl,
        poses_jsonl,
    })
}
