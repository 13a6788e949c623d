use courtpose::geometry::{estimate_homography, parse_correspondences, Point2};
use courtpose::model::{BBox, Detection, FrameDetections, ImageSize, Player, Source};
use courtpose::synth::{generate_scene, SceneConfig};
use courtpose::tracker::{
    associate, filter_by_court, parse_tracks_csv, positions_to_world, track_players, tracks_to_csv, Anchor,
    CourtRegion, Track, TrackPoint, TrackerConfig,
};
use proptest::prelude::*;

fn trapezoid() -> Vec<Point2<f64>> {
    vec![Point2::new(176.0, 440.0), Point2::new(676.0, 440.0), Point2::new(566.0, 120.0), Point2::new(286.0, 120.0)]
}

/// Even-odd ray casting toward +x.
fn ray_cast_inside(poly: &[Point2<f64>], p: Point2<f64>) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn near_boundary(poly: &[Point2<f64>], p: Point2<f64>) -> bool {
    let n = poly.len();
    (0..n).any(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let ab = b - a;
        let t = (((p - a).x * ab.x + (p - a).y * ab.y) / (ab.x * ab.x + ab.y * ab.y)).clamp(0.0, 1.0);
        p.distance(&(a + ab * t)) < 1e-6
    })
}

/// Person box whose bottom-center is `foot`.
fn person_at(foot: Point2<f64>, score: f64) -> Detection<f64> {
    Detection { bbox: BBox::new(foot.x - 20.0, foot.y - 100.0, 40.0, 100.0), score, class_label: "person".into() }
}

fn frame(frame_id: u64, detections: Vec<Detection<f64>>) -> FrameDetections<f64> {
    FrameDetections { frame_id, detections, image_size: ImageSize::new(852.0, 472.0) }
}

#[test]
fn court_filter_fixture() {
    let court = CourtRegion::new(trapezoid()).unwrap();
    let feet = [
        Point2::new(426.0, 300.0),
        Point2::new(300.0, 400.0),
        Point2::new(400.0, 440.0), // on the near baseline
        Point2::new(100.0, 300.0),
        Point2::new(426.0, 460.0),
    ];
    let dets: Vec<Detection<f64>> = feet.iter().map(|f| person_at(*f, 0.9)).collect();
    let expected =
        feet.iter().filter(|f| ray_cast_inside(&trapezoid(), **f) || near_boundary(&trapezoid(), **f)).count();
    assert_eq!(expected, 3);
    let kept = filter_by_court(&frame(0, dets), &court);
    assert_eq!(kept.detections.len(), expected);
    let kept_feet: Vec<Point2<f64>> = kept.detections.iter().map(|d| d.foot_point()).collect();
    assert_eq!(kept_feet, feet[..3].to_vec());
}

#[test]
fn non_person_labels_are_dropped() {
    let court = CourtRegion::new(trapezoid()).unwrap();
    let mut d = person_at(Point2::new(426.0, 300.0), 0.9);
    d.class_label = "sports ball".into();
    assert!(filter_by_court(&frame(0, vec![d]), &court).detections.is_empty());
}

#[test]
fn spurious_candidate_is_not_assigned() {
    let anchors = [Some(Anchor::new(Point2::new(400.0, 420.0))), Some(Anchor::new(Point2::new(420.0, 150.0)))];
    let near = person_at(Point2::new(405.0, 418.0), 0.8);
    let far = person_at(Point2::new(424.0, 152.0), 0.7);
    let spurious = person_at(Point2::new(410.0, 290.0), 0.99);
    let picked = associate(&anchors, &frame(1, vec![spurious, far.clone(), near.clone()]), 60.0);
    assert_eq!(picked, [Some(near), Some(far)]);
}

type Key = (f64, std::cmp::Reverse<usize>, f64, [usize; 2]);

/// Enumerates every feasible assignment, then sorts by the documented priority.
fn associate_oracle(anchors: &[Option<Anchor<f64>>; 2], cands: &[Detection<f64>], max_disp: f64) -> [Option<usize>; 2] {
    let n = cands.len();
    let ratio = |player: usize, i: usize| {
        let a = anchors[player].unwrap();
        a.position.distance(&cands[i].foot_point()) / (max_disp * (a.frames_ago.max(1) as f64).sqrt())
    };
    let feasible = |player: usize, i: usize| anchors[player].is_some() && ratio(player, i) <= 1.0;
    let mut all: Vec<(Key, [Option<usize>; 2])> = Vec::new();
    for a in 0..=n {
        for b in 0..=n {
            let pick = [(a < n).then_some(a), (b < n).then_some(b)];
            if a < n && a == b {
                continue;
            }
            if pick.iter().enumerate().any(|(p, i)| i.is_some_and(|i| !feasible(p, i))) {
                continue;
            }
            let mut cost = 0.0;
            let mut score = 0.0;
            for (p, i) in pick.iter().enumerate() {
                match *i {
                    Some(i) => {
                        cost += ratio(p, i);
                        score += cands[i].score;
                    }
                    None if anchors[p].is_some() => cost += 1.0,
                    None => {}
                }
            }
            let matched = pick.iter().filter(|i| i.is_some()).count();
            all.push(((cost, std::cmp::Reverse(matched), -score, pick.map(|i| i.unwrap_or(usize::MAX))), pick));
        }
    }
    all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    all[0].1
}

fn arb_foot() -> impl Strategy<Value = Point2<f64>> {
    (100.0f64..700.0, 100.0f64..460.0).prop_map(|(x, y)| Point2::new(x, y))
}

proptest! {
    #[test]
    fn court_filter_matches_ray_casting(feet in prop::collection::vec((0.0f64..852.0, 0.0f64..472.0), 1..20)) {
        let court = CourtRegion::new(trapezoid()).unwrap();
        let feet: Vec<Point2<f64>> = feet.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
        for f in &feet {
            if !near_boundary(&trapezoid(), *f) {
                prop_assert_eq!(court.contains(*f), ray_cast_inside(&trapezoid(), *f));
            }
        }
        let dets: Vec<Detection<f64>> = feet.iter().map(|f| person_at(*f, 0.5)).collect();
        let kept = filter_by_court(&frame(0, dets), &court);
        let expected: Vec<Point2<f64>> = feet.iter().copied().filter(|f| court.contains(*f)).collect();
        let got: Vec<Point2<f64>> = kept.detections.iter().map(|d| d.foot_point()).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn association_matches_exhaustive_oracle(
        a0 in prop::option::of((arb_foot(), 1u64..4)),
        a1 in prop::option::of((arb_foot(), 1u64..4)),
        cands in prop::collection::vec((arb_foot(), 0.1f64..1.0), 0..6),
        max_disp in 10.0f64..120.0,
    ) {
        let anchors = [a0, a1].map(|a| a.map(|(position, frames_ago)| Anchor { position, frames_ago }));
        let dets: Vec<Detection<f64>> = cands.iter().map(|(f, s)| person_at(*f, *s)).collect();
        let got = associate(&anchors, &frame(5, dets.clone()), max_disp);
        let want = associate_oracle(&anchors, &dets, max_disp).map(|i| i.map(|i| dets[i].clone()));
        prop_assert_eq!(got, want);
    }
}

fn scene_tracks(cfg: &SceneConfig) -> (courtpose::synth::Scene, Track<f64>, Track<f64>) {
    let scene = generate_scene(cfg).unwrap();
    let pairs = parse_correspondences::<f64>(&cfg.calibration_text().unwrap()).unwrap();
    let h = estimate_homography(&pairs).unwrap();
    let court = CourtRegion::new(cfg.court_camera().unwrap()).unwrap();
    let (near, far) = track_players(&scene.detections, &court, &h, &TrackerConfig::default()).unwrap();
    (scene, near, far)
}

#[test]
fn zero_noise_tracks_recover_ground_truth() {
    let cfg = SceneConfig { seed: 11, n_frames: 200, ..SceneConfig::default() };
    let (scene, near, far) = scene_tracks(&cfg);
    for track in [&near, &far] {
        let truth = &scene.truth.world_tracks[track.player.index()];
        assert_eq!(track.points.len(), truth.len());
        for p in &track.points {
            assert!(p.world.distance(&truth[p.frame_id as usize]) < 1e-6, "frame {}", p.frame_id);
            assert_eq!(p.source, Source::Detected);
        }
    }
}

#[test]
fn noisy_tracks_are_complete_and_continuous() {
    let cfg = SceneConfig {
        seed: 5,
        n_frames: 400,
        jitter_sigma: 2.0,
        miss_rate: 0.1,
        fp_rate: 0.1,
        spectator_rate: 0.2,
        ..SceneConfig::default()
    };
    let (scene, near, far) = scene_tracks(&cfg);
    for track in [&near, &far] {
        assert_eq!(track.points.len() as u64, cfg.n_frames);
        let frames: Vec<u64> = track.points.iter().map(|p| p.frame_id).collect();
        assert_eq!(frames, (0..cfg.n_frames).collect::<Vec<_>>());
        let detected: Vec<&TrackPoint<f64>> = track.points.iter().filter(|p| p.source == Source::Detected).collect();
        for w in detected.windows(2) {
            let gap = (w[1].frame_id - w[0].frame_id) as f64;
            assert!(w[0].cam.distance(&w[1].cam) <= 60.0 * gap.sqrt());
        }
        for w in track.points.windows(2) {
            assert!(w[0].cam.distance(&w[1].cam) <= 60.0);
        }
        // a false positive next to a missed player can pull the anchor away
        // for a frame or two; anything more means association is broken
        let lost = track
            .points
            .iter()
            .filter(|p| {
                p.source == Source::Interpolated
                    && !scene.truth.missed_frames[track.player.index()].contains(&p.frame_id)
            })
            .count();
        assert!(lost * 100 <= cfg.n_frames as usize, "{lost} frames lost");
    }
}

#[test]
fn tracking_is_deterministic_and_csv_round_trips() {
    let cfg = SceneConfig { seed: 3, n_frames: 120, jitter_sigma: 1.0, miss_rate: 0.1, ..SceneConfig::default() };
    let (_, near, far) = scene_tracks(&cfg);
    let (_, near2, far2) = scene_tracks(&cfg);
    let csv = tracks_to_csv(&[near.clone(), far.clone()]);
    assert_eq!(csv, tracks_to_csv(&[near2, far2]));
    let back = parse_tracks_csv::<f64>(&csv).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(tracks_to_csv(&back), csv);
}

#[test]
fn court_corners_project_to_court_world() {
    let cfg = SceneConfig::default();
    let pairs = parse_correspondences::<f64>(&cfg.calibration_text().unwrap()).unwrap();
    let h = estimate_homography(&pairs).unwrap();
    let points = cfg
        .court_camera()
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, cam)| TrackPoint { frame_id: i as u64, cam, world: cam, source: Source::Detected })
        .collect();
    let track = positions_to_world(&Track { player: Player::Near, points }, &h).unwrap();
    for (p, w) in track.points.iter().zip(cfg.court_world) {
        assert!(p.world.distance(&w) < 1e-6);
    }
}
