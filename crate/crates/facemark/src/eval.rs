//! Metrics harness: detection precision-recall at the 50% PASCAL overlap,
//! occlusion precision-recall over a score-threshold sweep, yaw statistics
//! (detection rate, success rate, mean/std absolute error) and the eye and
//! mouth openness features.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{iou, Point2, Rect};
use crate::landmarks::{LandmarkSet, INNER_MOUTH_POLY, LEFT_EYE, MOUTH, RIGHT_EYE};

/// PASCAL detection-match overlap.
pub const PASCAL_IOU: f64 = 0.5;
/// Yaw success tolerance in degrees.
pub const YAW_SUCCESS_DEG: f64 = 15.0;
/// Fraction of mouth landmarks that must be flagged before the mouth reading
/// itself counts as occluded.
pub const MOUTH_OCCLUDED_FRACTION: f64 = 0.5;

/// Greedy matching of scored detections against ground-truth boxes in one
/// image. Detections are visited in descending score order (ties on input
/// index); each one takes the highest-IOU unmatched ground truth provided
/// the overlap reaches `iou_thresh`. Every ground truth matches at most once.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Per detection: matched ground-truth index, or `None` (false positive).
    pub det_matches: Vec<Option<usize>>,
    /// Per ground truth: whether some detection claimed it.
    pub gt_matched: Vec<bool>,
}

/// Match one image's detections `(rect, score)` against its ground truths.
pub fn match_detections(dets: &[(Rect, f64)], gts: &[Rect], iou_thresh: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b].1
            .partial_cmp(&dets[a].1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut det_matches = vec![None; dets.len()];
    let mut gt_matched = vec![false; gts.len()];
    for &d in &order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt_matched[g] {
                continue;
            }
            let v = iou(&dets[d].0, gt);
            if v >= iou_thresh && best.map_or(true, |(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            gt_matched[g] = true;
            det_matches[d] = Some(g);
        }
    }
    MatchResult {
        det_matches,
        gt_matched,
    }
}

/// A precision-recall curve over a threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PRCurve {
    pub thresholds: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

impl PRCurve {
    /// `threshold,precision,recall` rows with a header line.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "threshold,precision,recall")?;
        for i in 0..self.thresholds.len() {
            writeln!(w, "{},{},{}", self.thresholds[i], self.precision[i], self.recall[i])?;
        }
        Ok(())
    }
}

fn precision_of(tp: usize, fp: usize) -> f64 {
    if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    }
}

/// Detection PR curve pooled over a dataset: `scored` holds every detection's
/// score and whether it was a true positive under the greedy matching;
/// `n_gt` is the total ground-truth count. The sweep visits every distinct
/// score from high to low. Errors when there is no ground truth at all.
pub fn pr_curve(scored: &[(f64, bool)], n_gt: usize) -> Result<PRCurve> {
    if n_gt == 0 {
        return Err(Error::NoGroundTruth);
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| {
        scored[b].0
            .partial_cmp(&scored[a].0)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut thresholds = Vec::new();
    let mut precision = Vec::new();
    let mut recall = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let score = scored[order[i]].0;
        // absorb every detection tied at this score
        while i < order.len() && scored[order[i]].0 == score {
            if scored[order[i]].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        thresholds.push(score);
        precision.push(precision_of(tp, fp));
        recall.push(tp as f64 / n_gt as f64);
    }
    Ok(PRCurve {
        thresholds,
        precision,
        recall,
    })
}

/// Occlusion PR: `pairs` holds `(occ_score, gt_occluded)` per landmark of
/// every matched face; occluded is the positive class and a landmark is
/// predicted occluded when its score falls below the threshold. Errors when
/// the ground truth has no occluded landmark (recall undefined).
pub fn occlusion_pr(pairs: &[(f64, bool)], thresholds: &[f64]) -> Result<PRCurve> {
    let n_pos = pairs.iter().filter(|(_, occ)| *occ).count();
    if n_pos == 0 {
        return Err(Error::NoOccludedGroundTruth);
    }
    let mut precision = Vec::with_capacity(thresholds.len());
    let mut recall = Vec::with_capacity(thresholds.len());
    for &th in thresholds {
        let (mut tp, mut fp) = (0usize, 0usize);
        for &(score, occ) in pairs {
            if score < th {
                if occ {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        precision.push(precision_of(tp, fp));
        recall.push(tp as f64 / n_pos as f64);
    }
    Ok(PRCurve {
        thresholds: thresholds.to_vec(),
        precision,
        recall,
    })
}

/// Yaw-angle statistics over ground-truth faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawMetrics {
    /// Fraction of ground-truth faces with a matched detection.
    pub detection_rate: f64,
    /// Over detected faces: fraction whose absolute yaw error is within 15 degrees.
    pub success_rate: f64,
    /// Mean absolute yaw error over detected faces, degrees.
    pub mean_abs_err: f64,
    /// Population standard deviation of the absolute yaw error, degrees.
    pub std_abs_err: f64,
}

impl YawMetrics {
    /// `dr,sr,mean_abs_err,std_abs_err` rows (rates as fractions).
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "dr,sr,mean_abs_err_deg,std_abs_err_deg")?;
        writeln!(
            w,
            "{:.4},{:.4},{:.2},{:.2}",
            self.detection_rate, self.success_rate, self.mean_abs_err, self.std_abs_err
        )
    }
}

/// Compute yaw metrics from per-ground-truth-face entries: the annotated yaw
/// and the predicted yaw of the matched detection, if any. Errors when no
/// face was matched (the over-detected statistics are undefined).
pub fn yaw_metrics(faces: &[(f64, Option<f64>)], tolerance_deg: f64) -> Result<YawMetrics> {
    let total = faces.len();
    if total == 0 {
        return Err(Error::NoGroundTruth);
    }
    let errors: Vec<f64> = faces
        .iter()
        .filter_map(|(gt, pred)| pred.map(|p| (p - gt).abs()))
        .collect();
    if errors.is_empty() {
        return Err(Error::NoMatchedFaces);
    }
    let matched = errors.len();
    let success = errors.iter().filter(|&&e| e <= tolerance_deg).count();
    let mean = errors.iter().sum::<f64>() / matched as f64;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / matched as f64;
    Ok(YawMetrics {
        detection_rate: matched as f64 / total as f64,
        success_rate: success as f64 / matched as f64,
        mean_abs_err: mean,
        std_abs_err: var.sqrt(),
    })
}

fn eye_ratio(lms: &LandmarkSet, idx: &[usize; 6]) -> Option<f64> {
    if idx.iter().any(|&i| !lms.detected[i] || lms.occ_flag[i]) {
        return None;
    }
    let p = |i: usize| lms.points[idx[i]];
    // corners are entries 0 and 3; (1,5) and (2,4) are the lid pairs
    let horizontal = p(0).distance(&p(3));
    if horizontal <= 0.0 {
        return None;
    }
    let v1 = p(1).distance(&p(5));
    let v2 = p(2).distance(&p(4));
    Some((v1 + v2) / (2.0 * horizontal))
}

/// Eye opening per eye (viewer-left, viewer-right): mean of the two vertical
/// lid distances over the corner distance. `None` when the eye is occluded
/// or undetected.
pub fn eye_opening(lms: &LandmarkSet) -> (Option<f64>, Option<f64>) {
    (eye_ratio(lms, &LEFT_EYE), eye_ratio(lms, &RIGHT_EYE))
}

/// Center of an eye as the mean of its six landmarks.
fn eye_center(lms: &LandmarkSet, idx: &[usize; 6]) -> Point2 {
    let (mut sx, mut sy) = (0.0, 0.0);
    for &i in idx {
        sx += lms.points[i].x;
        sy += lms.points[i].y;
    }
    Point2::new(sx / 6.0, sy / 6.0)
}

/// Distance between the two eye centers.
pub fn inter_ocular_distance(lms: &LandmarkSet) -> f64 {
    eye_center(lms, &LEFT_EYE).distance(&eye_center(lms, &RIGHT_EYE))
}

/// Shoelace area of a polygon in vertex order.
pub fn polygon_area(points: &[Point2]) -> f64 {
    let n = points.len();
    let mut twice = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    twice.abs() / 2.0
}

/// Mouth opening reading: area of the six non-corner inner-mouth landmarks
/// normalized by the squared inter-ocular distance, plus whether the mouth
/// region counts as occluded (more than half its landmarks flagged).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MouthOpening {
    /// `None` when any inner-mouth landmark is undetected.
    pub area_ratio: Option<f64>,
    pub occluded: bool,
}

pub fn mouth_opening(lms: &LandmarkSet, occluded_fraction: f64) -> MouthOpening {
    let flagged = MOUTH.clone().filter(|&i| lms.occ_flag[i]).count();
    let occluded = (flagged as f64) > occluded_fraction * MOUTH.clone().count() as f64;

    if INNER_MOUTH_POLY.iter().any(|&i| !lms.detected[i]) {
        return MouthOpening {
            area_ratio: None,
            occluded,
        };
    }
    let poly: Vec<Point2> = INNER_MOUTH_POLY.iter().map(|&i| lms.points[i]).collect();
    let iod = inter_ocular_distance(lms);
    let area_ratio = if iod > 0.0 {
        Some(polygon_area(&poly) / (iod * iod))
    } else {
        None
    };
    MouthOpening {
        area_ratio,
        occluded,
    }
}

/// Min-max normalize a series into [0, 1], the usual post-process before
/// plotting openness over time. Constant series come back all zero.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}
