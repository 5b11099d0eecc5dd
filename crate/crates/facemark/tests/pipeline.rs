//! Cross-module pipeline tests: detection fusion against jittered noisy
//! stacks, occlusion labels flowing from the compositor through refinement
//! into the metrics, and the preprocessing chain keeping landmarks and
//! pixels consistent.

use facemark::augment::{
    composite_occluder, derotate_roll, sample_occluder_placement, synth_detections, NoiseModel,
    Occluder, OccluderLibrary, SamplerConfig,
};
use facemark::eval::{occlusion_pr, MOUTH_OCCLUDED_FRACTION};
use facemark::geometry::{map_point, rect_from_landmarks, CoordFrame, Point2, Rect};
use facemark::heatmap::{decode_stack, encode_stack, EncodeParams};
use facemark::imaging::{clahe, crop_resize, flip_horizontal, rotate, Image};
use facemark::landmarks::{canonical_face, LandmarkSet, NUM_LANDMARKS};
use facemark::scoring::{nms_group, refine, refine_detection, Detection, DEFAULT_NMS_OVERLAP, DEFAULT_OCC_THRESHOLD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mean_landmark_error(pred: &LandmarkSet, gt: &LandmarkSet) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..NUM_LANDMARKS {
        if pred.detected[i] {
            sum += pred.points[i].distance(&gt.points[i]);
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

#[test]
fn fusion_beats_best_single_detection() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let params = EncodeParams::default();
    let cfg = SamplerConfig::default();
    let noise = NoiseModel {
        pixel_noise_sigma: 0.05,
        center_jitter_sigma: 0.6,
        amplitude_scale: (0.85, 1.0),
        dropout_prob: 0.02,
    };

    let mut fused_errors = Vec::new();
    let mut best_single_errors = Vec::new();
    for face_idx in 0..100 {
        let center = Point2::new(
            rng.random_range(200.0..400.0),
            rng.random_range(200.0..400.0),
        );
        let gt = canonical_face(center, rng.random_range(120.0..220.0));
        let dets = synth_detections(&gt, 5, &noise, &cfg, &params, &mut rng).unwrap();

        let refined: Vec<_> = dets.iter().map(|d| refine_detection(d, &params)).collect();
        let best = refined
            .iter()
            .filter_map(|r| mean_landmark_error(&r.landmarks, &gt))
            .fold(f64::INFINITY, f64::min);

        let items: Vec<(Rect, f64)> = refined
            .iter()
            .map(|r| (r.refined_rect, r.face_score))
            .collect();
        let groups = nms_group(&items, DEFAULT_NMS_OVERLAP);
        assert_eq!(groups.len(), 1, "face {face_idx}: all windows share the face");
        let face = refine(&dets, &groups[0], DEFAULT_OCC_THRESHOLD, &params).unwrap();
        let fused = mean_landmark_error(&face.landmarks, &gt).unwrap();

        fused_errors.push(fused);
        best_single_errors.push(best);
    }
    let mean_fused = fused_errors.iter().sum::<f64>() / fused_errors.len() as f64;
    let mean_best = best_single_errors.iter().sum::<f64>() / best_single_errors.len() as f64;
    assert!(
        mean_fused < mean_best,
        "fused {mean_fused:.4} px should beat best single {mean_best:.4} px"
    );
}

#[test]
fn compositor_labels_flow_to_occlusion_metrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = EncodeParams::default();

    let mut lib = OccluderLibrary::new();
    let occ_rgb = Image::filled(24, 16, 3, 40).unwrap();
    lib.add(Occluder::new(occ_rgb, vec![255; 24 * 16], "hand").unwrap());

    let mut pairs = Vec::new();
    for _ in 0..20 {
        let center = Point2::new(rng.random_range(150.0..350.0), rng.random_range(150.0..350.0));
        let gt_clean = canonical_face(center, 160.0);
        let face_box = rect_from_landmarks(&gt_clean.points).unwrap();

        // composite an occluder somewhere over the face; flags come out of the alpha test
        let frame = Image::filled(512, 512, 3, 128).unwrap();
        let occ = lib.pick(&mut rng).unwrap();
        let placement = sample_occluder_placement(occ, &face_box, &mut rng);
        let (_, gt_labeled) = composite_occluder(&frame, &gt_clean, occ, &placement);

        // zero-noise synthetic prediction on the padded window
        let window = face_box.padded(0.1);
        let mut score_lms = gt_labeled.clone();
        score_lms.map_points(|p| map_point(p, CoordFrame::Original(window), CoordFrame::Score));
        let stack = encode_stack(&score_lms, &params).unwrap();
        let det = Detection {
            rect: window,
            det_score: 1.0,
            stack,
        };
        let refined = refine_detection(&det, &params);
        let groups = nms_group(&[(refined.refined_rect, refined.face_score)], DEFAULT_NMS_OVERLAP);
        let face = refine(&[det], &groups[0], DEFAULT_OCC_THRESHOLD, &params).unwrap();

        for i in 0..NUM_LANDMARKS {
            if face.landmarks.detected[i] {
                pairs.push((face.landmarks.occ_score[i], gt_labeled.occ_flag[i]));
            }
        }
    }
    assert!(pairs.iter().any(|&(_, occ)| occ), "some landmarks must be occluded");

    let curve = occlusion_pr(&pairs, &[0.0, DEFAULT_OCC_THRESHOLD]).unwrap();
    assert_eq!(curve.precision[0], 1.0, "noise-free labels at threshold 0");
    assert_eq!(curve.recall[0], 1.0);
    assert!(curve.recall[1] >= curve.recall[0]);
}

#[test]
fn preprocessing_chain_keeps_landmarks_consistent() {
    // frame with a face, lightly rolled; level it, window it, flip it, and
    // the landmark bookkeeping must survive every step
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut frame = Image::filled(400, 400, 3, 0).unwrap();
    for i in 0..frame.data().len() {
        frame.data_mut()[i] = rng.random_range(40..220u8);
    }
    let gt = canonical_face(Point2::new(200.0, 200.0), 180.0);

    let equalized = clahe(&frame, 2.0, (8, 8)).unwrap();
    assert_eq!(equalized.width(), 400);

    let (rolled_img, rolled_lms) = rotate(&equalized, 9.0, Point2::new(200.0, 200.0), &gt);
    let (level_img, level_lms, applied) = derotate_roll(&rolled_img, &rolled_lms).unwrap();
    assert!((applied + 9.0).abs() < 0.05, "applied {applied}");
    for i in 0..NUM_LANDMARKS {
        assert!(level_lms.points[i].distance(&gt.points[i]) < 0.5, "landmark {i}");
    }

    let window = rect_from_landmarks(&level_lms.points).unwrap().padded(0.1);
    let crop = crop_resize(&level_img, &window, 256).unwrap();
    assert_eq!((crop.width(), crop.height()), (256, 256));

    let mut input_lms = level_lms.clone();
    input_lms.map_points(|p| map_point(p, CoordFrame::Original(window), CoordFrame::Input));
    for p in &input_lms.points {
        assert!(p.x > 0.0 && p.x < 256.0 && p.y > 0.0 && p.y < 256.0);
    }

    let (flipped, flipped_lms) = flip_horizontal(&crop, &input_lms);
    let (_, unflipped_lms) = flip_horizontal(&flipped, &flipped_lms);
    for i in 0..NUM_LANDMARKS {
        assert!(unflipped_lms.points[i].distance(&input_lms.points[i]) < 1e-9);
    }

    // encode from the input frame, decode through the stack, map back out
    let mut score_lms = input_lms.clone();
    score_lms.map_points(|p| map_point(p, CoordFrame::Input, CoordFrame::Score));
    let stack = encode_stack(&score_lms, &EncodeParams::default()).unwrap();
    let recovered = decode_stack(&stack, &window);
    for i in 0..NUM_LANDMARKS {
        assert!(recovered.detected[i]);
        assert!(
            recovered.points[i].distance(&level_lms.points[i]) < 1.0,
            "landmark {i}: {}",
            recovered.points[i].distance(&level_lms.points[i])
        );
    }
}

#[test]
fn eye_and_mouth_features_respond_to_occlusion() {
    let lms = canonical_face(Point2::new(128.0, 128.0), 120.0);
    let face_box = rect_from_landmarks(&lms.points).unwrap();
    let frame = Image::filled(256, 256, 3, 100).unwrap();

    // opaque occluder over the mouth region
    let mouth_pts: Vec<Point2> = (48..68).map(|i| lms.points[i]).collect();
    let tight = facemark::geometry::tight_rect(&mouth_pts).unwrap().padded(0.2);
    let occ = Occluder::new(Image::filled(10, 10, 3, 0).unwrap(), vec![255; 100], "hand").unwrap();
    let (_, labeled) = composite_occluder(&frame, &lms, &occ, &tight);

    let reading = facemark::eval::mouth_opening(&labeled, MOUTH_OCCLUDED_FRACTION);
    assert!(reading.occluded, "hand over mouth flags the reading");
    let _ = face_box;
}
