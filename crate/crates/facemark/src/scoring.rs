//! Landmark and face scores, detection grouping and heatmap fusion.
//!
//! Each detection's stack is first decoded on its own: the landmark score is
//! the negated sum of squared magnitude differences between the actual map
//! and an ideal Gaussian placed at the predicted location, and the refined
//! face score is the sum over all 68 landmarks. Detections are then grouped
//! by non-maximum suppression on the refined boxes and scores, the score
//! images of a group are aligned into a common frame and summed (not
//! averaged), normalized by the global maximum magnitude, and decoded again
//! to produce the final landmarks and occlusion scores.

use crate::error::{Error, Result};
use crate::geometry::{iou, map_point, rect_from_landmarks, CoordFrame, Point2, Rect, SCORE_SIZE};
use crate::heatmap::{decode, EncodeParams, Heatmap, HeatmapStack};
use crate::landmarks::{LandmarkSet, NUM_LANDMARKS};

/// Default occlusion-score threshold: scores below it flag the landmark as
/// occluded. Low positive scores also indicate weak confidence, hence the
/// threshold sits above zero.
pub const DEFAULT_OCC_THRESHOLD: f64 = 0.2;
/// Default NMS grouping overlap.
pub const DEFAULT_NMS_OVERLAP: f64 = 0.2;

/// One face-detector output: box in original-image coordinates, detector
/// score and the 68-map stack predicted for the crop.
#[derive(Debug, Clone)]
pub struct Detection {
    pub rect: Rect,
    pub det_score: f64,
    pub stack: HeatmapStack,
}

/// Per-detection decode result: landmarks in the original frame, their
/// score-frame locations, the refined box and the refined face score.
#[derive(Debug, Clone)]
pub struct RefinedDetection {
    pub landmarks: LandmarkSet,
    pub score_locations: Vec<Option<Point2>>,
    pub refined_rect: Rect,
    pub face_score: f64,
}

/// An NMS cluster of detections assumed to cover one face. `members[0]` is
/// the anchor: the member with the highest refined score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionGroup {
    pub members: Vec<usize>,
}

impl DetectionGroup {
    pub fn anchor(&self) -> usize {
        self.members[0]
    }
}

/// The fused per-face output.
#[derive(Debug, Clone)]
pub struct RefinedFace {
    pub rect: Rect,
    /// Sum of the 68 landmark scores on the fused, normalized stack.
    pub face_score: f64,
    /// Landmarks in original-image coordinates with occlusion scores from the
    /// fused stack (max-abs normalized) and flags at the chosen threshold.
    pub landmarks: LandmarkSet,
}

/// Landmark score: build the ideal magnitude image for a blob at `loc` and
/// return the negated sum of squared magnitude differences against the
/// actual map. Zero iff the magnitudes agree everywhere; occlusion does not
/// change it since only magnitudes enter.
pub fn landmark_score(actual: &Heatmap, loc: Point2, params: &EncodeParams) -> f64 {
    let ideal = Heatmap::gaussian(loc, params.sigma, 1.0);
    let mut sum = 0.0f64;
    for (a, i) in actual.data().iter().zip(ideal.data()) {
        let d = i.abs() as f64 - a.abs() as f64;
        sum += d * d;
    }
    -sum
}

/// Score for a landmark whose map carries no signal: the ideal blob measured
/// against an all-zero map. The blob is placed at the grid center; interior
/// placement makes the value location-independent up to border truncation.
pub fn missing_landmark_score(params: &EncodeParams) -> f64 {
    let center = Point2::new((SCORE_SIZE / 2) as f64, (SCORE_SIZE / 2) as f64);
    landmark_score(&Heatmap::zero(), center, params)
}

/// Refined face score: the sum of the 68 landmark scores at the given
/// locations. Landmarks without a location take the missing-landmark score.
pub fn face_score(stack: &HeatmapStack, locs: &[Option<Point2>], params: &EncodeParams) -> f64 {
    assert_eq!(locs.len(), NUM_LANDMARKS, "need one location per landmark");
    stack
        .maps()
        .iter()
        .zip(locs)
        .map(|(map, loc)| match loc {
            Some(p) => landmark_score(map, *p, params),
            None => missing_landmark_score(params),
        })
        .sum()
}

/// Decode one detection's stack and score it. The refined box is fitted to
/// the detected landmarks; when nothing decodes the original box is kept.
pub fn refine_detection(det: &Detection, params: &EncodeParams) -> RefinedDetection {
    let mut score_locations = vec![None; NUM_LANDMARKS];
    for (i, map) in det.stack.maps().iter().enumerate() {
        score_locations[i] = decode(map).map(|d| d.location);
    }
    let landmarks = crate::heatmap::decode_stack(&det.stack, &det.rect);
    let refined_rect = rect_from_landmarks(&landmarks.detected_points()).unwrap_or(det.rect);
    let face_score = face_score(&det.stack, &score_locations, params);
    RefinedDetection {
        landmarks,
        score_locations,
        refined_rect,
        face_score,
    }
}

/// Greedy non-maximum suppression grouping: repeatedly pop the best-scoring
/// remaining detection and absorb every detection overlapping it by at least
/// `overlap` IOU. Ties break on input index, so the result is deterministic.
/// Every input index lands in exactly one group.
pub fn nms_group(boxes_scores: &[(Rect, f64)], overlap: f64) -> Vec<DetectionGroup> {
    let mut order: Vec<usize> = (0..boxes_scores.len()).collect();
    order.sort_by(|&a, &b| {
        boxes_scores[b]
            .1
            .partial_cmp(&boxes_scores[a].1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut taken = vec![false; boxes_scores.len()];
    let mut groups = Vec::new();
    for &best in &order {
        if taken[best] {
            continue;
        }
        taken[best] = true;
        let mut members = vec![best];
        for &other in &order {
            if taken[other] {
                continue;
            }
            if iou(&boxes_scores[best].0, &boxes_scores[other].0) >= overlap {
                taken[other] = true;
                members.push(other);
            }
        }
        groups.push(DetectionGroup { members });
    }
    groups
}

/// Align every member's score images into a 64x64 frame laid over the
/// anchor's original (unrefined) detection box and sum them per landmark.
/// No division by the member count: near-miss members contribute weak maps
/// and averaging would only dilute the signal. Samples falling outside a
/// member's grid contribute zero.
pub fn align_and_sum(dets: &[Detection], group: &DetectionGroup) -> HeatmapStack {
    let anchor_rect = dets[group.anchor()].rect;
    let mut fused = HeatmapStack::zero();
    for &m in &group.members {
        let member = &dets[m];
        if member.rect == anchor_rect {
            for (out, src) in fused.maps_mut().iter_mut().zip(member.stack.maps()) {
                for (o, s) in out.data_mut().iter_mut().zip(src.data()) {
                    *o += s;
                }
            }
            continue;
        }
        // anchor-score -> original -> member-score composes to one affine map
        // per axis; spot-check it against the frame chain below in tests
        let size = SCORE_SIZE as f64;
        let kx = anchor_rect.w / member.rect.w;
        let ky = anchor_rect.h / member.rect.h;
        let cx = (anchor_rect.x - member.rect.x) * size / member.rect.w;
        let cy = (anchor_rect.y - member.rect.y) * size / member.rect.h;
        for (out, src) in fused.maps_mut().iter_mut().zip(member.stack.maps()) {
            if src.max_abs() == 0.0 {
                continue;
            }
            for y in 0..SCORE_SIZE {
                let my = y as f64 * ky + cy;
                for x in 0..SCORE_SIZE {
                    let mx = x as f64 * kx + cx;
                    let v = src.sample_bilinear(Point2::new(mx, my));
                    if v != 0.0 {
                        let cur = out.get(x, y);
                        out.set(x, y, cur + v as f32);
                    }
                }
            }
        }
    }
    fused
}

/// Divide every map by the global maximum absolute value so the best-scoring
/// landmark reaches magnitude one. Signs are preserved. Errors when the
/// whole stack is zero.
pub fn normalize_stack(stack: &HeatmapStack) -> Result<HeatmapStack> {
    let max_abs = stack.max_abs();
    if max_abs == 0.0 {
        return Err(Error::ZeroStack);
    }
    let mut out = stack.clone();
    for map in out.maps_mut() {
        for v in map.data_mut() {
            *v /= max_abs;
        }
    }
    Ok(out)
}

/// Fuse a group and extract the refined face: align + sum + normalize, decode
/// every fused map, read the signed occlusion score at each refined location,
/// flag landmarks under `occ_threshold`, refit the box and rescore.
pub fn refine(
    dets: &[Detection],
    group: &DetectionGroup,
    occ_threshold: f64,
    params: &EncodeParams,
) -> Result<RefinedFace> {
    let anchor_rect = dets[group.anchor()].rect;
    let fused = normalize_stack(&align_and_sum(dets, group))?;

    let mut landmarks = LandmarkSet::from_points(vec![Point2::default(); NUM_LANDMARKS])
        .expect("fixed-size point vector");
    let mut score_locations = vec![None; NUM_LANDMARKS];
    for (i, map) in fused.maps().iter().enumerate() {
        match decode(map) {
            Some(d) => {
                score_locations[i] = Some(d.location);
                landmarks.points[i] =
                    map_point(d.location, CoordFrame::Score, CoordFrame::Original(anchor_rect));
                landmarks.occ_score[i] = d.value;
                landmarks.occ_flag[i] = d.value < occ_threshold;
                landmarks.lm_score[i] = Some(landmark_score(map, d.location, params));
                landmarks.detected[i] = true;
            }
            None => {
                landmarks.detected[i] = false;
                landmarks.occ_flag[i] = true;
            }
        }
    }

    let rect = rect_from_landmarks(&landmarks.detected_points()).unwrap_or(anchor_rect);
    let score = face_score(&fused, &score_locations, params);
    Ok(RefinedFace {
        rect,
        face_score: score,
        landmarks,
    })
}
