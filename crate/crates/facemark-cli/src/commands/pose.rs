use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use facemark::pose::{estimate_pose, CameraIntrinsics, FaceModel3D};
use facemark::Point2;

use crate::config::Config;

#[derive(Args, Debug)]
pub struct PoseArgs {
    /// JSONL records carrying landmarks (e.g. refine output).
    #[arg(long)]
    landmarks: PathBuf,
    /// Focal length in pixels.
    #[arg(long)]
    focal: Option<f64>,
    /// Principal point `cx,cy`; defaults to the image center when records
    /// carry an image size.
    #[arg(long, value_parser = super::parse_point)]
    principal: Option<Point2>,
    /// CSV face model; built-in default when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Drop occluded landmarks from the correspondences.
    #[arg(long)]
    exclude_occluded: bool,
    /// Output JSONL with the pose field filled; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: crate::Common,
}

pub fn run(args: PoseArgs) -> Result<()> {
    let cfg = Config::load(args.common.config.as_deref())?;
    let focal = cfg
        .resolve_opt_f64(args.focal, "focal")?
        .context("--focal is required (or set `focal` in the config)")?;
    let model = match cfg.resolve_opt_path(args.model, "model") {
        Some(p) => FaceModel3D::from_csv(&p)?,
        None => FaceModel3D::default(),
    };

    let mut records = facemark::formats::read_jsonl(&args.landmarks)?;
    let mut solved = 0usize;
    for (i, rec) in records.iter_mut().enumerate() {
        let Some(lms) = rec.landmark_set() else {
            eprintln!("warning: record {}: no landmarks; skipped", i + 1);
            continue;
        };
        let principal = args.principal.or_else(|| {
            rec.image_size
                .map(|[w, h]| Point2::new(w as f64 / 2.0, h as f64 / 2.0))
        });
        let Some(principal) = principal else {
            eprintln!(
                "warning: record {}: no principal point (give --principal or image_size); skipped",
                i + 1
            );
            continue;
        };
        let cam = CameraIntrinsics::new(focal, principal)?;
        match estimate_pose(&lms, &model, &cam, args.exclude_occluded) {
            Ok((_, angles)) => {
                rec.pose = Some(angles);
                solved += 1;
            }
            Err(e) => eprintln!("warning: record {}: pose unavailable: {e}", i + 1),
        }
    }

    let mut text = String::new();
    for rec in &records {
        text.push_str(&serde_json::to_string(rec)?);
        text.push('\n');
    }
    super::write_text_output(args.out.as_deref(), &text)?;
    eprintln!("pose: solved {solved}/{} records", records.len());
    Ok(())
}
