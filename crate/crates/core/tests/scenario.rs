//! Properties of the scenario generator, post-processing and clip I/O.

use proptest::prelude::*;
use semv2x::config::ClipSpec;
use semv2x::scenario::netpbm::{load_clip, save_clip};
use semv2x::scenario::{
    apply_binary_mask, apply_heatmap, apply_hybrid, detect_collision, frame_gap_trim,
    generate_clips, generate_scenario, min_distance, split_ids, BBox, Frame, HeatmapGains, Label,
    Mask, WorldSpec,
};

fn render() -> ClipSpec {
    ClipSpec {
        height_px: 48,
        width_px: 48,
        channels: 1,
        ..ClipSpec::default()
    }
}

fn frame_mask_boxes() -> impl Strategy<Value = (Frame, Mask, Vec<BBox>)> {
    (
        1usize..24,
        1usize..24,
        prop::sample::select(vec![1usize, 3]),
    )
        .prop_flat_map(|(w, h, c)| {
            let boxes = prop::collection::vec((0..w, 0..h, 0..w, 0..h), 0..4).prop_map(|v| {
                v.into_iter()
                    .map(|(a, b, c, d)| BBox {
                        x0: a.min(c),
                        y0: b.min(d),
                        x1: a.max(c),
                        y1: b.max(d),
                    })
                    .collect::<Vec<_>>()
            });
            (
                prop::collection::vec(any::<u8>(), w * h * c),
                prop::collection::vec(any::<bool>(), w * h),
                boxes,
            )
                .prop_map(move |(data, bits, boxes)| {
                    (
                        Frame::from_raw(w, h, c, data).unwrap(),
                        Mask::new(w, h, bits).unwrap(),
                        boxes,
                    )
                })
        })
}

proptest! {
    #[test]
    fn binary_mask_is_idempotent((frame, mask, _) in frame_mask_boxes()) {
        let once = apply_binary_mask(&frame, &mask).unwrap();
        prop_assert_eq!(apply_binary_mask(&once, &mask).unwrap(), once.clone());
        prop_assert!(once.sum() <= frame.sum());
    }

    #[test]
    fn hybrid_is_the_masked_heatmap_with_unit_road_gain(
        (frame, mask, boxes) in frame_mask_boxes(),
        g in 0.0f64..3.0,
        bg in 0.0f64..2.0,
    ) {
        let gains = HeatmapGains { vehicle: g, road: 1.0, background: bg };
        let heat = apply_heatmap(&frame, &mask, &boxes, &gains).unwrap();
        let via_heatmap = apply_binary_mask(&heat, &mask).unwrap();
        prop_assert_eq!(apply_hybrid(&frame, &mask, &boxes, g).unwrap(), via_heatmap);
    }

    #[test]
    fn unit_gains_leave_the_frame_unchanged((frame, mask, boxes) in frame_mask_boxes()) {
        let gains = HeatmapGains { vehicle: 1.0, road: 1.0, background: 1.0 };
        prop_assert_eq!(apply_heatmap(&frame, &mask, &boxes, &gains).unwrap(), frame);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trimmed_collision_clips_stay_above_the_contact_distance(seed in any::<u64>(), gap in 1usize..13) {
        let world = WorldSpec::default();
        let clip = generate_scenario(&world, &render(), Label::Collision, seed).unwrap();
        let contact = clip.collision_frame.unwrap();
        prop_assert_eq!(contact, clip.len() - 1);
        prop_assert_eq!(detect_collision(&clip.trajectories, world.collision_dist_m), Some(contact));
        let trimmed = frame_gap_trim(&clip, gap).unwrap();
        prop_assert_eq!(trimmed.len(), clip.len() - gap);
        prop_assert!(min_distance(&trimmed.trajectories) >= world.collision_dist_m);
        prop_assert_eq!(detect_collision(&trimmed.trajectories, world.collision_dist_m), None);
    }

    #[test]
    fn safe_clips_keep_their_clearance(seed in any::<u64>()) {
        let world = WorldSpec::default();
        let clip = generate_scenario(&world, &render(), Label::Safe, seed).unwrap();
        prop_assert!(clip.collision_frame.is_none());
        prop_assert!(min_distance(&clip.trajectories) >= 2.0 * world.collision_dist_m);
        prop_assert!(min_distance(&clip.trajectories) >= world.safe_clearance_m);
        prop_assert!(frame_gap_trim(&clip, 1).is_err());
    }

    #[test]
    fn generation_is_a_function_of_the_seed(seed in any::<u64>()) {
        let world = WorldSpec::default();
        let a = generate_scenario(&world, &render(), Label::Collision, seed).unwrap();
        let b = generate_scenario(&world, &render(), Label::Collision, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn class_counts_and_split_sizes() {
    let clips = generate_clips(&WorldSpec::default(), &render(), 385, 115, 11).unwrap();
    let labels: Vec<Label> = clips.iter().map(|c| c.label).collect();
    assert_eq!(labels.iter().filter(|l| **l == Label::Safe).count(), 385);
    assert_eq!(
        labels.iter().filter(|l| **l == Label::Collision).count(),
        115
    );
    let test = split_ids(&labels, 0.2, 11);
    let held = |l: Label| {
        labels
            .iter()
            .zip(&test)
            .filter(|(x, t)| **x == l && **t)
            .count()
    };
    assert_eq!((held(Label::Safe), held(Label::Collision)), (77, 23));
    assert_eq!(split_ids(&labels, 0.2, 11), test);
    assert_ne!(split_ids(&labels, 0.2, 12), test);
}

#[test]
fn clips_survive_a_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (i, kind) in [Label::Safe, Label::Collision].into_iter().enumerate() {
        let mut spec = render();
        spec.channels = 1 + 2 * i as u32;
        let mut clip = generate_scenario(&WorldSpec::default(), &spec, kind, 5).unwrap();
        clip.seed = u64::MAX;
        let path = dir.path().join(format!("clip{i}"));
        save_clip(&path, &clip).unwrap();
        let stored = load_clip(&path).unwrap();
        assert_eq!(stored.frames, clip.frames);
        assert_eq!(stored.road_mask, clip.road_mask);
        assert_eq!(stored.manifest.seed, u64::MAX);
        assert_eq!(stored.manifest.label, kind);
        assert_eq!(stored.manifest.collision_frame, clip.collision_frame);
        assert_eq!(stored.manifest.n_frames, clip.len());
    }
}
