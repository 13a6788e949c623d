//! Tracking-by-detection for a singles match.
//!
//! Three filters turn raw person detections into exactly two tracks:
//! detections whose foot point is off the court are dropped, each player
//! takes at most one detection per frame within a displacement budget of
//! its last position, and frames where a player was missed are filled by
//! linear interpolation between the surrounding detections.

use std::path::Path;

use thiserror::Error;

use crate::geometry::{parse_numbers, CalibrationFileError, GeometryError, Homography, Point2};
use crate::model::{Detection, FrameDetections, Player, Source};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_DISP: f64 = 60.0;
pub const PERSON_CLASS: &str = "person";

/// Distance within which a point counts as lying on a court edge.
const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackerError {
    #[error("invalid court polygon: {0}")]
    InvalidCourt(String),
    #[error("empty track: the {0} player is never detected")]
    EmptyTrack(Player),
    #[error("no frame with exactly two in-court detections to seed player identities")]
    NoSeedFrame,
    #[error("max_disp must be positive")]
    InvalidMaxDisp,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum TrackFileError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Court outline in camera pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CourtRegion<T> {
    polygon: Vec<Point2<T>>,
}

impl<T: Scalar> CourtRegion<T> {
    pub fn new(polygon: Vec<Point2<T>>) -> Result<Self, TrackerError> {
        if polygon.len() < 3 {
            return Err(TrackerError::InvalidCourt(format!("need at least 3 vertices, got {}", polygon.len())));
        }
        if polygon.iter().any(|p| !p.is_finite()) {
            return Err(TrackerError::InvalidCourt("non-finite vertex".into()));
        }
        let n = polygon.len();
        let twice_area = (0..n).fold(T::zero(), |acc, i| {
            let (a, b) = (polygon[i], polygon[(i + 1) % n]);
            acc + a.x * b.y - b.x * a.y
        });
        if twice_area == T::zero() {
            return Err(TrackerError::InvalidCourt("polygon has zero area".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = (polygon[i], polygon[(i + 1) % n]);
                let (c, d) = (polygon[j], polygon[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return Err(TrackerError::InvalidCourt(format!("edges {i} and {j} intersect")));
                }
            }
        }
        Ok(Self { polygon })
    }

    pub fn vertices(&self) -> &[Point2<T>] {
        &self.polygon
    }

    fn edges(&self) -> impl Iterator<Item = (Point2<T>, Point2<T>)> + '_ {
        let n = self.polygon.len();
        (0..n).map(move |i| (self.polygon[i], self.polygon[(i + 1) % n]))
    }

    /// Winding-number test; points on an edge count as inside.
    pub fn contains(&self, p: Point2<T>) -> bool {
        if self.edges().any(|(a, b)| distance_to_segment(p, a, b) <= T::lit(EDGE_EPS)) {
            return true;
        }
        let mut winding = 0i32;
        for (a, b) in self.edges() {
            if a.y <= p.y {
                if b.y > p.y && cross(a, b, p) > T::zero() {
                    winding += 1;
                }
            } else if b.y <= p.y && cross(a, b, p) < T::zero() {
                winding -= 1;
            }
        }
        winding != 0
    }
}

fn cross<T: Scalar>(a: Point2<T>, b: Point2<T>, p: Point2<T>) -> T {
    (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)
}

fn distance_to_segment<T: Scalar>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let ab = b - a;
    let len_sq = ab.x * ab.x + ab.y * ab.y;
    if len_sq == T::zero() {
        return p.distance(&a);
    }
    let t = (((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len_sq).max(T::zero()).min(T::one());
    p.distance(&(a + ab * t))
}

fn segments_intersect<T: Scalar>(a: Point2<T>, b: Point2<T>, c: Point2<T>, d: Point2<T>) -> bool {
    let o1 = cross(a, b, c).signum();
    let o2 = cross(a, b, d).signum();
    let o3 = cross(c, d, a).signum();
    let o4 = cross(c, d, b).signum();
    let z = T::zero();
    let on = |p: Point2<T>, q: Point2<T>, r: Point2<T>| {
        cross(p, q, r) == z && r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    if o1 != o2 && o3 != o4 && cross(a, b, c) != z && cross(a, b, d) != z && cross(c, d, a) != z && cross(c, d, b) != z
    {
        return true;
    }
    on(a, b, c) || on(a, b, d) || on(c, d, a) || on(c, d, b)
}

pub fn parse_court<T: Scalar>(text: &str) -> Result<Vec<Point2<T>>, CalibrationFileError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v = parse_numbers::<T>(line, idx + 1)?;
        if v.len() != 2 {
            return Err(CalibrationFileError::Parse {
                line: idx + 1,
                msg: format!("expected 2 numbers (x y), found {}", v.len()),
            });
        }
        out.push(Point2::new(v[0], v[1]));
    }
    Ok(out)
}

pub fn load_court<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<Point2<T>>, CalibrationFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| CalibrationFileError::Io { path: path.display().to_string(), source })?;
    parse_court(&text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint<T> {
    pub frame_id: u64,
    pub cam: Point2<T>,
    pub world: Point2<T>,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track<T> {
    pub player: Player,
    pub points: Vec<TrackPoint<T>>,
}

impl<T: Scalar> Track<T> {
    pub fn first_frame(&self) -> Option<u64> {
        self.points.first().map(|p| p.frame_id)
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.points.last().map(|p| p.frame_id)
    }
}

/// Keeps person detections whose foot point is on the court (edges included).
pub fn filter_by_court<T: Scalar>(frame: &FrameDetections<T>, court: &CourtRegion<T>) -> FrameDetections<T> {
    FrameDetections {
        frame_id: frame.frame_id,
        image_size: frame.image_size,
        detections: frame
            .detections
            .iter()
            .filter(|d| d.class_label == PERSON_CLASS && court.contains(d.foot_point()))
            .cloned()
            .collect(),
    }
}

/// Last detected foot point of a player and how many frames ago it was seen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor<T> {
    pub position: Point2<T>,
    pub frames_ago: u64,
}

impl<T: Scalar> Anchor<T> {
    /// Anchor seen in the immediately preceding frame.
    pub fn new(position: Point2<T>) -> Self {
        Self { position, frames_ago: 1 }
    }
}

/// Assigns at most one detection per player.
///
/// A player's budget is `max_disp · √frames_ago`, so a player missed for a
/// few frames can be picked up again without letting a stale anchor reach
/// across the court. A pairing costs its distance divided by the budget and
/// is allowed up to 1; an unmatched player costs 1. Among one-to-one
/// matchings, picks the lowest total cost, then the most matched players,
/// then the highest total score, then the lowest candidate indices.
/// Candidates left unassigned are discarded.
pub fn associate<T: Scalar>(
    anchors: &[Option<Anchor<T>>; 2],
    frame: &FrameDetections<T>,
    max_disp: T,
) -> [Option<Detection<T>>; 2] {
    let candidates = &frame.detections;
    let budget = |player: usize| -> Option<T> {
        let anchor = anchors[player]?;
        Some(max_disp * T::from_u64(anchor.frames_ago.max(1)).expect("frame count fits in scalar").sqrt())
    };
    let cost = |player: usize, idx: usize| -> Option<T> {
        let anchor = anchors[player]?;
        let d = anchor.position.distance(&candidates[idx].foot_point()) / budget(player)?;
        (d <= T::one()).then_some(d)
    };

    let options = |player: usize| -> Vec<Option<usize>> {
        std::iter::once(None).chain((0..candidates.len()).filter(|&i| cost(player, i).is_some()).map(Some)).collect()
    };

    // (cost, matched, score, indices, pick)
    type Choice<T> = (T, usize, T, [usize; 2], [Option<usize>; 2]);
    let mut best: Option<Choice<T>> = None;
    for near in options(0) {
        for far in options(1) {
            if near.is_some() && near == far {
                continue;
            }
            let pick = [near, far];
            let (mut matched, mut total, mut score) = (0usize, T::zero(), T::zero());
            for (player, idx) in pick.iter().enumerate() {
                match *idx {
                    Some(i) => {
                        matched += 1;
                        total = total + cost(player, i).expect("filtered above");
                        score = score + candidates[i].score;
                    }
                    None if anchors[player].is_some() => total = total + T::one(),
                    None => {}
                }
            }
            let indices = pick.map(|i| i.unwrap_or(usize::MAX));
            let better = match &best {
                None => true,
                Some((bt, bm, bs, bi, _)) => {
                    use std::cmp::Ordering::*;
                    let ord = total
                        .partial_cmp(bt)
                        .unwrap_or(Equal)
                        .then(matched.cmp(bm).reverse())
                        .then(bs.partial_cmp(&score).unwrap_or(Equal))
                        .then(indices.cmp(bi));
                    ord == Less
                }
            };
            if better {
                best = Some((total, matched, score, indices, pick));
            }
        }
    }
    let pick = best.map(|b| b.4).unwrap_or([None, None]);
    pick.map(|i| i.map(|i| candidates[i].clone()))
}

/// Foot points assigned to each player (indexed by [`Player::index`]) in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAssignment<T> {
    pub frame_id: u64,
    pub players: [Option<Point2<T>>; 2],
}

/// Builds one gap-free track per player from per-frame assignments.
///
/// Each player's span runs from their first to their last detection; every
/// frame inside it without a detection is filled by time-weighted linear
/// interpolation between the nearest detected neighbors. The `world` field
/// mirrors `cam` until [`positions_to_world`] is applied.
pub fn enforce_two_players<T: Scalar>(
    assignments: &[FrameAssignment<T>],
) -> Result<(Track<T>, Track<T>), TrackerError> {
    let build = |player: Player| -> Result<Track<T>, TrackerError> {
        let mut detected: Vec<(u64, Point2<T>)> =
            assignments.iter().filter_map(|a| a.players[player.index()].map(|p| (a.frame_id, p))).collect();
        detected.sort_by_key(|d| d.0);
        detected.dedup_by_key(|d| d.0);
        if detected.is_empty() {
            return Err(TrackerError::EmptyTrack(player));
        }
        let mut points = Vec::new();
        for pair in detected.windows(2) {
            let ((ta, pa), (tb, pb)) = (pair[0], pair[1]);
            points.push(TrackPoint { frame_id: ta, cam: pa, world: pa, source: Source::Detected });
            let span = T::from_u64(tb - ta).expect("frame gap fits in scalar");
            for t in (ta + 1)..tb {
                let frac = T::from_u64(t - ta).expect("frame gap fits in scalar") / span;
                let cam = pa.lerp(&pb, frac);
                points.push(TrackPoint { frame_id: t, cam, world: cam, source: Source::Interpolated });
            }
        }
        let (t, p) = *detected.last().expect("nonempty");
        points.push(TrackPoint { frame_id: t, cam: p, world: p, source: Source::Detected });
        Ok(Track { player, points })
    };
    Ok((build(Player::Near)?, build(Player::Far)?))
}

/// Projects every camera position onto the court plane.
pub fn positions_to_world<T: Scalar>(track: &Track<T>, h: &Homography<T>) -> Result<Track<T>, GeometryError> {
    let points = track
        .points
        .iter()
        .map(|p| Ok(TrackPoint { world: h.apply(p.cam)?, ..*p }))
        .collect::<Result<Vec<_>, GeometryError>>()?;
    Ok(Track { player: track.player, points })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig<T> {
    pub max_disp: T,
}

impl<T: Scalar> Default for TrackerConfig<T> {
    fn default() -> Self {
        Self { max_disp: T::lit(DEFAULT_MAX_DISP) }
    }
}

/// Runs court filtering and association over a whole detection stream.
///
/// Identities are seeded on the first frame with exactly two in-court
/// detections: the one lower in the image (larger foot y) is the near
/// player. Earlier frames are not used.
pub fn assign_frames<T: Scalar>(
    frames: &[FrameDetections<T>],
    court: &CourtRegion<T>,
    config: &TrackerConfig<T>,
) -> Result<Vec<FrameAssignment<T>>, TrackerError> {
    if !(config.max_disp > T::zero()) {
        return Err(TrackerError::InvalidMaxDisp);
    }
    let filtered: Vec<FrameDetections<T>> = frames.iter().map(|f| filter_by_court(f, court)).collect();
    let seed = filtered.iter().position(|f| f.detections.len() == 2).ok_or(TrackerError::NoSeedFrame)?;

    let mut out = Vec::with_capacity(filtered.len() - seed);
    let seed_frame = &filtered[seed];
    let (a, b) = (seed_frame.detections[0].foot_point(), seed_frame.detections[1].foot_point());
    let (near, far) = if b.y > a.y { (b, a) } else { (a, b) };
    out.push(FrameAssignment { frame_id: seed_frame.frame_id, players: [Some(near), Some(far)] });
    let mut last_seen = [(near, seed_frame.frame_id), (far, seed_frame.frame_id)];

    for frame in &filtered[seed + 1..] {
        let anchors = last_seen
            .map(|(position, seen)| Some(Anchor { position, frames_ago: frame.frame_id.saturating_sub(seen).max(1) }));
        let picked = associate(&anchors, frame, config.max_disp);
        let players = picked.map(|d| d.map(|d| d.foot_point()));
        for (slot, p) in last_seen.iter_mut().zip(&players) {
            if let Some(p) = p {
                *slot = (*p, frame.frame_id);
            }
        }
        out.push(FrameAssignment { frame_id: frame.frame_id, players });
    }
    Ok(out)
}

/// Full camera-to-world tracking: filter, associate, fill gaps, project.
pub fn track_players<T: Scalar>(
    frames: &[FrameDetections<T>],
    court: &CourtRegion<T>,
    h: &Homography<T>,
    config: &TrackerConfig<T>,
) -> Result<(Track<T>, Track<T>), TrackerError> {
    let assignments = assign_frames(frames, court, config)?;
    let (near, far) = enforce_two_players(&assignments)?;
    Ok((positions_to_world(&near, h)?, positions_to_world(&far, h)?))
}

pub const TRACK_CSV_HEADER: &str = "frame,player,cam_x,cam_y,world_x,world_y,source";

pub fn tracks_to_csv<T: Scalar>(tracks: &[Track<T>]) -> String {
    let mut rows: Vec<(u64, Player, String)> = Vec::new();
    for t in tracks {
        for p in &t.points {
            rows.push((
                p.frame_id,
                t.player,
                format!(
                    "{},{},{},{},{},{},{}",
                    p.frame_id,
                    t.player,
                    p.cam.x,
                    p.cam.y,
                    p.world.x,
                    p.world.y,
                    p.source.as_str()
                ),
            ));
        }
    }
    rows.sort_by_key(|r| (r.0, r.1));
    let mut out = String::from(TRACK_CSV_HEADER);
    out.push('\n');
    for (_, _, row) in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Reads a track CSV back into per-player tracks (near first).
pub fn parse_tracks_csv<T: Scalar>(text: &str) -> Result<Vec<Track<T>>, TrackFileError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut tracks =
        [Track { player: Player::Near, points: Vec::new() }, Track { player: Player::Far, points: Vec::new() }];
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| TrackFileError::Parse { line, msg: e.to_string() })?;
        if record.len() != 7 {
            return Err(TrackFileError::Parse { line, msg: format!("expected 7 fields, found {}", record.len()) });
        }
        let err = |msg: String| TrackFileError::Parse { line, msg };
        let frame_id: u64 = record[0].parse().map_err(|_| err(format!("invalid frame {:?}", &record[0])))?;
        let player: Player = record[1].parse().map_err(err)?;
        let num = |k: usize| -> Result<T, TrackFileError> {
            record[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(T::lit)
                .ok_or_else(|| TrackFileError::Parse { line, msg: format!("invalid number {:?}", &record[k]) })
        };
        let source = record[6].parse().map_err(err)?;
        let point =
            TrackPoint { frame_id, cam: Point2::new(num(2)?, num(3)?), world: Point2::new(num(4)?, num(5)?), source };
        let track = &mut tracks[player.index()];
        if let Some(prev) = track.last_frame() {
            if frame_id <= prev {
                return Err(TrackFileError::Parse {
                    line,
                    msg: format!("frame {frame_id} for {player} not after {prev}"),
                });
            }
        }
        track.points.push(point);
    }
    Ok(tracks.into_iter().filter(|t| !t.points.is_empty()).collect())
}

pub fn load_tracks_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<Track<T>>, TrackFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| TrackFileError::Io { path: path.display().to_string(), source })?;
    parse_tracks_csv(&text)
}
