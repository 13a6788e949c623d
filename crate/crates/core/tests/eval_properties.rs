use courtpose::eval::{compare_trajectories, ground_truth_track, parse_ground_truth, px_to_cm, ComparisonPlane};
use courtpose::geometry::Point2;
use courtpose::model::{detections_to_jsonl, parse_detections, parse_poses, poses_to_jsonl, Player, Source};
use courtpose::synth::{generate_scene, SceneConfig};
use courtpose::tracker::{Track, TrackPoint};
use proptest::prelude::*;

fn track(player: Player, pts: &[(f64, f64)]) -> Track<f64> {
    Track {
        player,
        points: pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                let p = Point2::new(x, y);
                TrackPoint { frame_id: i as u64, cam: p, world: p, source: Source::Detected }
            })
            .collect(),
    }
}

fn arb_track(len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-500.0f64..500.0, -500.0f64..500.0), len)
}

proptest! {
    #[test]
    fn error_is_symmetric(a in arb_track(20), b in arb_track(20)) {
        let (ta, tb) = (track(Player::Near, &a), track(Player::Near, &b));
        let ab = compare_trajectories(&ta, &tb, ComparisonPlane::Camera, 2.5).unwrap();
        let ba = compare_trajectories(&tb, &ta, ComparisonPlane::Camera, 2.5).unwrap();
        prop_assert_eq!(ab.per_frame, ba.per_frame);
        prop_assert_eq!(ab.mean_px, ba.mean_px);
    }

    #[test]
    fn error_scales_with_coordinates(a in arb_track(15), b in arb_track(15), k in 0.1f64..10.0) {
        let base = compare_trajectories(&track(Player::Far, &a), &track(Player::Far, &b), ComparisonPlane::Camera, 2.5).unwrap();
        let scale = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| (k * x, k * y)).collect::<Vec<_>>();
        let scaled = compare_trajectories(&track(Player::Far, &scale(&a)), &track(Player::Far, &scale(&b)), ComparisonPlane::Camera, 2.5).unwrap();
        prop_assert!((scaled.mean_px - k * base.mean_px).abs() <= 1e-9 * (1.0 + scaled.mean_px));
        prop_assert!((scaled.max_px - k * base.max_px).abs() <= 1e-9 * (1.0 + scaled.max_px));
    }

    #[test]
    fn error_ignores_frame_order(a in arb_track(12), b in arb_track(12), shift in 1usize..12) {
        let ta = track(Player::Near, &a);
        let mut rotated = ta.clone();
        rotated.points.rotate_left(shift);
        let tb = track(Player::Near, &b);
        let x = compare_trajectories(&ta, &tb, ComparisonPlane::Camera, 2.5).unwrap();
        let y = compare_trajectories(&rotated, &tb, ComparisonPlane::Camera, 2.5).unwrap();
        prop_assert_eq!(x.per_frame, y.per_frame);
    }

    #[test]
    fn cm_conversion_is_linear(px in 0.0f64..1e4, c in 0.01f64..100.0) {
        prop_assert!((px_to_cm(px, c) - px * c).abs() <= 1e-12 * (1.0 + px * c));
    }
}

#[test]
fn brute_force_mean_on_offset_tracks() {
    let gt: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64)).collect();
    // frame i is off by i/10 along x
    let est: Vec<(f64, f64)> = gt.iter().enumerate().map(|(i, &(x, y))| (x + i as f64 / 10.0, y)).collect();
    let report =
        compare_trajectories(&track(Player::Near, &est), &track(Player::Near, &gt), ComparisonPlane::World, 2.5)
            .unwrap();
    let brute: f64 = (0..10).map(|i| i as f64 / 10.0).sum::<f64>() / 10.0;
    assert!((report.mean_px - brute).abs() < 1e-12);
    assert!((report.mean_cm - 100.0 * brute).abs() < 1e-10);
    assert!((report.max_px - 0.9).abs() < 1e-12);
}

#[test]
fn synthetic_inputs_round_trip_losslessly() {
    let cfg = SceneConfig {
        seed: 9,
        n_frames: 150,
        jitter_sigma: 1.5,
        miss_rate: 0.1,
        fp_rate: 0.1,
        pose_spike_rate: 0.05,
        ..SceneConfig::default()
    };
    let scene = generate_scene(&cfg).unwrap();
    let dets = parse_detections::<f64>(&scene.detections_jsonl).unwrap();
    for (a, b) in dets.iter().zip(&scene.detections) {
        assert_eq!(a, b);
    }
    assert_eq!(dets.len(), scene.detections.len());
    assert_eq!(detections_to_jsonl(&dets), scene.detections_jsonl);
    let poses = parse_poses::<f64>(&scene.poses_jsonl).unwrap();
    assert_eq!(poses.len(), 2);
    assert_eq!(poses_to_jsonl(&poses), scene.poses_jsonl);
    for p in &poses {
        assert_eq!(p.poses, scene.poses[p.player.index()].poses);
    }
}

#[test]
fn ground_truth_csv_round_trips() {
    let scene = generate_scene(&SceneConfig { seed: 2, n_frames: 50, ..SceneConfig::default() }).unwrap();
    let rows = scene.truth.rows();
    let text = courtpose::eval::ground_truth_to_csv(&rows);
    assert_eq!(parse_ground_truth::<f64>(&text).unwrap(), rows);
    let near = ground_truth_track(&rows, Player::Near, None).unwrap();
    let report = compare_trajectories(&near, &near, ComparisonPlane::TopView, 2.5).unwrap();
    assert_eq!(report.mean_px, 0.0);
    assert_eq!(report.per_frame.len(), 50);
}
