use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use facemark::eval::{
    match_detections, occlusion_pr, pr_curve, yaw_metrics, PASCAL_IOU, YAW_SUCCESS_DEG,
};
use facemark::formats::DetectionRecord;
use facemark::geometry::Rect;

use crate::config::Config;

fn records_by_image(records: &[DetectionRecord]) -> Vec<(String, Vec<&DetectionRecord>)> {
    let mut images: Vec<(String, Vec<&DetectionRecord>)> = Vec::new();
    for rec in records {
        match images.iter_mut().find(|(name, _)| *name == rec.image) {
            Some((_, v)) => v.push(rec),
            None => images.push((rec.image.clone(), vec![rec])),
        }
    }
    images
}

fn detection_score(rec: &DetectionRecord, use_refined: bool) -> f64 {
    if use_refined {
        rec.face_score.unwrap_or(rec.det_score)
    } else {
        rec.det_score
    }
}

/// Pair up detections and ground truths image by image with greedy matching.
fn matched_pairs<'a>(
    dets: &'a [DetectionRecord],
    gts: &'a [DetectionRecord],
    iou_thresh: f64,
    use_refined: bool,
) -> Result<Vec<(Option<&'a DetectionRecord>, &'a DetectionRecord)>> {
    let det_images = records_by_image(dets);
    let mut pairs: Vec<(Option<&DetectionRecord>, &DetectionRecord)> = Vec::new();
    for (image, gt_recs) in records_by_image(gts) {
        let empty = Vec::new();
        let image_dets = det_images
            .iter()
            .find(|(name, _)| *name == image)
            .map(|(_, v)| v)
            .unwrap_or(&empty);
        let items: Vec<(Rect, f64)> = image_dets
            .iter()
            .map(|r| Ok((r.rect()?, detection_score(r, use_refined))))
            .collect::<Result<_>>()?;
        let gt_rects: Vec<Rect> = gt_recs.iter().map(|r| r.rect()).collect::<facemark::Result<_>>()?;
        let m = match_detections(&items, &gt_rects, iou_thresh);
        for (g, gt_rec) in gt_recs.iter().enumerate() {
            let det = m
                .det_matches
                .iter()
                .position(|&dm| dm == Some(g))
                .map(|d| image_dets[d]);
            pairs.push((det, gt_rec));
        }
    }
    Ok(pairs)
}

#[derive(Args, Debug)]
pub struct EvalDetArgs {
    /// Detections JSONL (refined or raw).
    #[arg(long)]
    detections: PathBuf,
    /// Ground-truth faces JSONL (boxes required).
    #[arg(long)]
    gt: PathBuf,
    /// Rank by the refined face score instead of the detector score.
    #[arg(long)]
    refined_score: bool,
    /// Match overlap.
    #[arg(long)]
    iou: Option<f64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: crate::Common,
}

pub fn run_det(args: EvalDetArgs) -> Result<()> {
    let cfg = Config::load(args.common.config.as_deref())?;
    let iou_thresh = cfg.resolve_f64(args.iou, "iou", PASCAL_IOU)?;

    let dets = facemark::formats::read_jsonl(&args.detections)?;
    let gts = facemark::formats::read_jsonl(&args.gt)?;
    let gt_images = records_by_image(&gts);

    let mut pooled: Vec<(f64, bool)> = Vec::new();
    let mut n_gt = 0usize;
    for (image, image_dets) in records_by_image(&dets) {
        let empty = Vec::new();
        let image_gts = gt_images
            .iter()
            .find(|(name, _)| *name == image)
            .map(|(_, v)| v)
            .unwrap_or(&empty);
        let items: Vec<(Rect, f64)> = image_dets
            .iter()
            .map(|r| Ok((r.rect()?, detection_score(r, args.refined_score))))
            .collect::<Result<_>>()?;
        let gt_rects: Vec<Rect> = image_gts
            .iter()
            .map(|r| r.rect())
            .collect::<facemark::Result<_>>()?;
        let m = match_detections(&items, &gt_rects, iou_thresh);
        for (i, &(_, score)) in items.iter().enumerate() {
            pooled.push((score, m.det_matches[i].is_some()));
        }
    }
    // ground truths in images without detections still count
    for (_, image_gts) in &gt_images {
        n_gt += image_gts.len();
    }

    let curve = pr_curve(&pooled, n_gt)?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    super::write_text_output(args.out.as_deref(), &String::from_utf8(buf).unwrap())
}

#[derive(Args, Debug)]
pub struct EvalOccArgs {
    /// Refined detections JSONL with occlusion scores.
    #[arg(long)]
    detections: PathBuf,
    /// Ground-truth faces JSONL with occ_flags.
    #[arg(long)]
    gt: PathBuf,
    /// Comma-separated thresholds; default sweeps -1.0..=1.0 in 0.05 steps.
    #[arg(long)]
    thresholds: Option<String>,
    /// Face match overlap.
    #[arg(long)]
    iou: Option<f64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: crate::Common,
}

fn parse_thresholds(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| anyhow::anyhow!("bad threshold `{p}`: {e}"))
        })
        .collect()
}

pub fn run_occ(args: EvalOccArgs) -> Result<()> {
    let cfg = Config::load(args.common.config.as_deref())?;
    let iou_thresh = cfg.resolve_f64(args.iou, "iou", PASCAL_IOU)?;
    let thresholds = match &args.thresholds {
        Some(s) => parse_thresholds(s)?,
        // exact grid: k/20 for integer k keeps 0.0 and 0.2 representable
        None => (0..=40).map(|k| (k as f64 - 20.0) / 20.0).collect(),
    };

    let dets = facemark::formats::read_jsonl(&args.detections)?;
    let gts = facemark::formats::read_jsonl(&args.gt)?;

    let mut pairs: Vec<(f64, bool)> = Vec::new();
    for (det, gt) in matched_pairs(&dets, &gts, iou_thresh, true)? {
        let Some(det) = det else { continue };
        let (Some(scores), Some(detected)) = (&det.occ_scores, &det.detected) else {
            bail!("detections lack occ_scores; run `refine` first");
        };
        let Some(gt_flags) = &gt.occ_flags else {
            bail!("ground truth lacks occ_flags");
        };
        for i in 0..scores.len().min(gt_flags.len()) {
            if detected[i] {
                pairs.push((scores[i], gt_flags[i]));
            }
        }
    }
    if pairs.is_empty() {
        bail!("no matched faces between detections and ground truth");
    }

    let curve = occlusion_pr(&pairs, &thresholds)?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    super::write_text_output(args.out.as_deref(), &String::from_utf8(buf).unwrap())
}

#[derive(Args, Debug)]
pub struct EvalYawArgs {
    /// Refined detections JSONL with pose.
    #[arg(long)]
    detections: PathBuf,
    /// Ground-truth faces JSONL with an annotated pose (yaw used).
    #[arg(long)]
    gt: PathBuf,
    /// Success tolerance in degrees.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Face match overlap.
    #[arg(long)]
    iou: Option<f64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: crate::Common,
}

pub fn run_yaw(args: EvalYawArgs) -> Result<()> {
    let cfg = Config::load(args.common.config.as_deref())?;
    let iou_thresh = cfg.resolve_f64(args.iou, "iou", PASCAL_IOU)?;
    let tolerance = cfg.resolve_f64(args.tolerance, "tolerance", YAW_SUCCESS_DEG)?;

    let dets = facemark::formats::read_jsonl(&args.detections)?;
    let gts = facemark::formats::read_jsonl(&args.gt)?;

    let mut faces: Vec<(f64, Option<f64>)> = Vec::new();
    for (det, gt) in matched_pairs(&dets, &gts, iou_thresh, true)? {
        let Some(gt_pose) = &gt.pose else {
            bail!("ground truth lacks pose annotations");
        };
        let pred = det.and_then(|d| d.pose.as_ref()).map(|p| p.yaw);
        faces.push((gt_pose.yaw, pred));
    }

    let metrics = yaw_metrics(&faces, tolerance)?;
    let mut buf = Vec::new();
    metrics.write_csv(&mut buf)?;
    super::write_text_output(args.out.as_deref(), &String::from_utf8(buf).unwrap())
}
