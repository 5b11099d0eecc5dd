use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use facemark::formats::DetectionRecord;
use facemark::heatmap::decode_stack;
use facemark::scoring::DEFAULT_OCC_THRESHOLD;

use crate::config::Config;

#[derive(Args, Debug)]
pub struct DecodeArgs {
    /// Heatmap container to decode.
    #[arg(long)]
    heatmap: PathBuf,
    /// Detection box `x,y,w,h` that frames the stack in the original image.
    #[arg(long, value_parser = super::parse_rect)]
    r#box: facemark::geometry::Rect,
    /// Occlusion flag threshold on the raw (pre-fusion) signed values.
    #[arg(long)]
    occ_threshold: Option<f64>,
    /// Output JSON file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: crate::Common,
}

pub fn run(args: DecodeArgs) -> Result<()> {
    let cfg = Config::load(args.common.config.as_deref())?;
    let occ_threshold =
        cfg.resolve_f64(args.occ_threshold, "occ-threshold", DEFAULT_OCC_THRESHOLD)?;

    let stack = facemark::formats::read_heatmap_stack(&args.heatmap)?;
    let mut lms = decode_stack(&stack, &args.r#box);
    for i in 0..lms.len() {
        lms.occ_flag[i] = lms.occ_score[i] < occ_threshold;
    }

    let image = args
        .heatmap
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut record = DetectionRecord::new(image, &args.r#box, 0.0);
    record.set_landmarks(&lms);

    let mut text = serde_json::to_string(&record)?;
    text.push('\n');
    super::write_text_output(args.out.as_deref(), &text)
}
