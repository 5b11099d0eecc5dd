use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use facemark::formats::DetectionRecord;
use facemark::geometry::Rect;
use facemark::pose::{estimate_pose, CameraIntrinsics, FaceModel3D};
use facemark::scoring::{
    nms_group, refine, refine_detection, Detection, DEFAULT_NMS_OVERLAP, DEFAULT_OCC_THRESHOLD,
};
use facemark::heatmap::EncodeParams;
use facemark::Point2;

use crate::config::Config;

#[derive(Args, Debug)]
pub struct RefineArgs {
    /// Input detections JSONL; every record needs a heatmap path.
    #[arg(long)]
    detections: PathBuf,
    /// Output refined faces JSONL.
    #[arg(long)]
    out: PathBuf,
    /// Occlusion flag threshold on fused, normalized scores.
    #[arg(long)]
    occ_threshold: Option<f64>,
    /// Grouping overlap for non-maximum suppression.
    #[arg(long)]
    nms_overlap: Option<f64>,
    /// Gaussian blob standard deviation in score pixels.
    #[arg(long)]
    sigma: Option<f64>,
    /// Focal length in pixels; enables head pose on each refined face.
    #[arg(long)]
    focal: Option<f64>,
    /// Principal point `cx,cy`; defaults to the image center when the
    /// records carry an image size.
    #[arg(long, value_parser = super::parse_point)]
    principal: Option<Point2>,
    /// CSV face model for pose; built-in default when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Drop occluded landmarks from the pose correspondences.
    #[arg(long)]
    exclude_occluded: bool,
    #[command(flatten)]
    common: crate::Common,
}

struct ImageBatch {
    image: String,
    records: Vec<DetectionRecord>,
}

fn group_by_image(records: Vec<DetectionRecord>) -> Vec<ImageBatch> {
    let mut batches: Vec<ImageBatch> = Vec::new();
    for rec in records {
        match batches.iter_mut().find(|b| b.image == rec.image) {
            Some(b) => b.records.push(rec),
            None => batches.push(ImageBatch {
                image: rec.image.clone(),
                records: vec![rec],
            }),
        }
    }
    batches
}

struct PoseSetup {
    model: FaceModel3D,
    focal: f64,
    principal: Option<Point2>,
    exclude_occluded: bool,
}

fn refine_image(
    batch: &ImageBatch,
    jsonl_path: &Path,
    params: &EncodeParams,
    occ_threshold: f64,
    nms_overlap: f64,
    pose_setup: Option<&PoseSetup>,
) -> Result<Vec<DetectionRecord>> {
    let mut dets = Vec::new();
    for rec in &batch.records {
        let heatmap = rec
            .heatmap
            .as_ref()
            .with_context(|| format!("image {}: record without heatmap path", batch.image))?;
        let path = super::resolve_heatmap_path(jsonl_path, heatmap);
        let stack = facemark::formats::read_heatmap_stack(&path)?;
        dets.push(Detection {
            rect: rec.rect()?,
            det_score: rec.det_score,
            stack,
        });
    }

    let per_det: Vec<_> = dets.iter().map(|d| refine_detection(d, params)).collect();
    let items: Vec<(Rect, f64)> = per_det
        .iter()
        .map(|r| (r.refined_rect, r.face_score))
        .collect();
    let groups = nms_group(&items, nms_overlap);

    let mut out = Vec::new();
    for group in &groups {
        let anchor_idx = group.anchor();
        let face = match refine(&dets, group, occ_threshold, params) {
            Ok(f) => f,
            Err(facemark::Error::ZeroStack) => {
                eprintln!(
                    "warning: image {}: group of {} detections has all-zero fused maps; skipped",
                    batch.image,
                    group.members.len()
                );
                continue;
            }
            Err(e) => return Err(e.into()),
        };

        let mut rec = DetectionRecord::new(
            batch.image.clone(),
            &face.rect,
            dets[anchor_idx].det_score,
        );
        rec.image_size = batch.records[anchor_idx].image_size;
        rec.face_score = Some(face.face_score);
        rec.set_landmarks(&face.landmarks);

        if let Some(setup) = pose_setup {
            let principal = setup.principal.or_else(|| {
                rec.image_size
                    .map(|[w, h]| Point2::new(w as f64 / 2.0, h as f64 / 2.0))
            });
            if let Some(principal) = principal {
                let cam = CameraIntrinsics::new(setup.focal, principal)?;
                match estimate_pose(&face.landmarks, &setup.model, &cam, setup.exclude_occluded) {
                    Ok((_, angles)) => rec.pose = Some(angles),
                    Err(e) => eprintln!(
                        "warning: image {}: pose unavailable: {e}",
                        batch.image
                    ),
                }
            } else {
                eprintln!(
                    "warning: image {}: no principal point (give --principal or image_size); pose skipped",
                    batch.image
                );
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn run(args: RefineArgs) -> Result<()> {
    let cfg = Config::load(args.common.config.as_deref())?;
    let occ_threshold =
        cfg.resolve_f64(args.occ_threshold, "occ-threshold", DEFAULT_OCC_THRESHOLD)?;
    let nms_overlap = cfg.resolve_f64(args.nms_overlap, "nms-overlap", DEFAULT_NMS_OVERLAP)?;
    let params = EncodeParams {
        sigma: cfg.resolve_f64(args.sigma, "sigma", 1.5)?,
    };
    let focal = cfg.resolve_opt_f64(args.focal, "focal")?;
    let model_path = cfg.resolve_opt_path(args.model, "model");
    let jobs = cfg.resolve_usize(args.common.jobs, "jobs", 0)?;

    let pose_setup = match focal {
        Some(focal) => Some(PoseSetup {
            model: match &model_path {
                Some(p) => FaceModel3D::from_csv(p)?,
                None => FaceModel3D::default(),
            },
            focal,
            principal: args.principal,
            exclude_occluded: args.exclude_occluded,
        }),
        None => None,
    };

    let records = facemark::formats::read_jsonl(&args.detections)?;
    let batches = group_by_image(records);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    let results: Vec<Result<Vec<DetectionRecord>>> = pool.install(|| {
        use rayon::prelude::*;
        batches
            .par_iter()
            .map(|batch| {
                refine_image(
                    batch,
                    &args.detections,
                    &params,
                    occ_threshold,
                    nms_overlap,
                    pose_setup.as_ref(),
                )
            })
            .collect()
    });

    // input order regardless of completion order
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    facemark::formats::write_jsonl(&args.out, &out)?;
    eprintln!(
        "refine: {} detections -> {} faces -> {}",
        batches.iter().map(|b| b.records.len()).sum::<usize>(),
        out.len(),
        args.out.display()
    );
    Ok(())
}
