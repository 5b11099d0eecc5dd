use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use facemark::eval::{eye_opening, min_max_normalize, mouth_opening, MOUTH_OCCLUDED_FRACTION};

use crate::config::Config;

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    /// JSONL records with landmarks, in frame order.
    #[arg(long)]
    landmarks: PathBuf,
    /// Fraction of mouth landmarks that must be flagged before the mouth
    /// reading counts as occluded.
    #[arg(long)]
    mouth_occluded_fraction: Option<f64>,
    /// Min-max normalize each numeric column over the sequence.
    #[arg(long)]
    normalize: bool,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: crate::Common,
}

pub fn run(args: FeaturesArgs) -> Result<()> {
    let cfg = Config::load(args.common.config.as_deref())?;
    let fraction = cfg.resolve_f64(
        args.mouth_occluded_fraction,
        "mouth-occluded-fraction",
        MOUTH_OCCLUDED_FRACTION,
    )?;

    let records = facemark::formats::read_jsonl(&args.landmarks)?;
    let mut rows: Vec<(String, Option<f64>, Option<f64>, Option<f64>, bool)> = Vec::new();
    for rec in &records {
        let Some(lms) = rec.landmark_set() else {
            rows.push((rec.image.clone(), None, None, None, false));
            continue;
        };
        let (left, right) = eye_opening(&lms);
        let mouth = mouth_opening(&lms, fraction);
        rows.push((rec.image.clone(), left, right, mouth.area_ratio, mouth.occluded));
    }

    if args.normalize {
        for col in 0..3usize {
            let present: Vec<f64> = rows
                .iter()
                .filter_map(|r| [r.1, r.2, r.3][col])
                .collect();
            if present.is_empty() {
                continue;
            }
            let normalized = min_max_normalize(&present);
            let mut it = normalized.into_iter();
            for row in &mut rows {
                let slot = match col {
                    0 => &mut row.1,
                    1 => &mut row.2,
                    _ => &mut row.3,
                };
                if slot.is_some() {
                    *slot = it.next();
                }
            }
        }
    }

    let mut text = String::from("frame,image,left_eye,right_eye,mouth_area,mouth_occluded\n");
    for (i, (image, left, right, mouth, occluded)) in rows.iter().enumerate() {
        let fmt = |v: &Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        writeln!(
            text,
            "{i},{image},{},{},{},{}",
            fmt(left),
            fmt(right),
            fmt(mouth),
            occluded
        )?;
    }
    super::write_text_output(args.out.as_deref(), &text)
}
