use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use facemark::geometry::{map_point, rect_from_landmarks, CoordFrame};
use facemark::heatmap::{encode_stack, EncodeParams};
use facemark::landmarks::{LandmarkSet, NUM_LANDMARKS};

use crate::config::Config;

#[derive(Args, Debug)]
pub struct EncodeArgs {
    /// 300-W .pts annotation in original-image coordinates.
    #[arg(long)]
    pts: PathBuf,
    /// Detection box `x,y,w,h` framing the face; derived from the landmarks
    /// (tight box, 20% top extension, 10% padding) when omitted.
    #[arg(long, value_parser = super::parse_rect)]
    r#box: Option<facemark::geometry::Rect>,
    /// JSON array of 68 booleans marking occluded landmarks.
    #[arg(long)]
    occ_flags: Option<PathBuf>,
    /// Gaussian blob standard deviation in score pixels.
    #[arg(long)]
    sigma: Option<f64>,
    /// Output heatmap container.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: crate::Common,
}

pub fn run(args: EncodeArgs) -> Result<()> {
    let cfg = Config::load(args.common.config.as_deref())?;
    let sigma = cfg.resolve_f64(args.sigma, "sigma", 1.5)?;
    let params = EncodeParams { sigma };

    let points = facemark::formats::read_pts(&args.pts)?;
    let mut lms = LandmarkSet::from_points(points)?;
    if let Some(path) = &args.occ_flags {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let flags: Vec<bool> = serde_json::from_str(&text)
            .with_context(|| format!("{}: expected a JSON array of booleans", path.display()))?;
        if flags.len() != NUM_LANDMARKS {
            bail!("{}: expected {NUM_LANDMARKS} flags, got {}", path.display(), flags.len());
        }
        lms.occ_flag = flags;
    }

    let rect = match args.r#box {
        Some(r) => r,
        None => {
            let derived = rect_from_landmarks(&lms.points)?.padded(0.1);
            println!("box: {},{},{},{}", derived.x, derived.y, derived.w, derived.h);
            derived
        }
    };

    lms.map_points(|p| map_point(p, CoordFrame::Original(rect), CoordFrame::Score));
    let stack = encode_stack(&lms, &params)?;
    facemark::formats::write_heatmap_stack(&args.out, &stack)?;
    Ok(())
}
