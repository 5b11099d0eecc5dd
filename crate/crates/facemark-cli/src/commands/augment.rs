use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use facemark::augment::{
    composite_occluder, roll_leveling_angle, sample_negative, sample_occluder_placement,
    sample_positive, Occluder, OccluderLibrary, SamplerConfig,
};
use facemark::geometry::{map_point, rect_from_landmarks, CoordFrame, Point2, INPUT_SIZE};
use facemark::heatmap::{EncodeParams, HeatmapStack};
use facemark::imaging::{clahe, crop_resize, flip_horizontal, rotate, Image, DEFAULT_CLIP_LIMIT, DEFAULT_TILES};
use facemark::landmarks::LandmarkSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::Config;

#[derive(Args, Debug)]
pub struct AugmentArgs {
    /// Input images (PNG), paired one-to-one with --pts.
    #[arg(long, required = true)]
    image: Vec<PathBuf>,
    /// 300-W annotations, one per image.
    #[arg(long, required = true)]
    pts: Vec<PathBuf>,
    /// Directory of occluders: one subdirectory per category, RGBA PNGs inside.
    #[arg(long)]
    occluders: Option<PathBuf>,
    /// Output directory; samples plus a `manifest.jsonl` land here.
    #[arg(long)]
    out_dir: PathBuf,
    /// Positive windows per face.
    #[arg(long)]
    pos_per_face: Option<usize>,
    /// Negative windows per image.
    #[arg(long)]
    neg_per_image: Option<usize>,
    /// Uniform roll augmentation range in degrees (plus/minus).
    #[arg(long)]
    roll_range: Option<f64>,
    /// Also write encoded label stacks next to each sample.
    #[arg(long)]
    encode_labels: bool,
    /// Gaussian blob standard deviation for encoded labels.
    #[arg(long)]
    sigma: Option<f64>,
    #[command(flatten)]
    common: crate::Common,
}

fn load_occluders(dir: &Path) -> Result<OccluderLibrary> {
    let mut lib = OccluderLibrary::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let category = entry.file_name().to_string_lossy().into_owned();
        for file in std::fs::read_dir(entry.path())? {
            let file = file?;
            let path = file.path();
            if path.extension().is_some_and(|e| e == "png") {
                let (rgb, alpha) = facemark::formats::load_png(&path)?;
                let alpha = alpha.unwrap_or_else(|| vec![255; rgb.width() * rgb.height()]);
                lib.add(Occluder::new(rgb, alpha, category.clone())?);
            }
        }
    }
    Ok(lib)
}

#[allow(clippy::too_many_arguments)]
fn positive_sample(
    frame: &Image,
    lms: &LandmarkSet,
    level_angle: f64,
    occluders: &OccluderLibrary,
    cfg: &SamplerConfig,
    params: &EncodeParams,
    encode_labels: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Image, LandmarkSet, facemark::geometry::Rect, f64, bool, Option<HeatmapStack>)> {
    // level the face, then re-roll by a uniform angle in one resampling pass
    let roll = rng.random_range(-cfg.roll_range..=cfg.roll_range);
    let angle = level_angle + roll;
    let center = Point2::new(frame.width() as f64 / 2.0, frame.height() as f64 / 2.0);
    let (rotated, rotated_lms) = rotate(frame, angle, center, lms);

    let gt_box = rect_from_landmarks(&rotated_lms.points)?;
    let window = sample_positive(&gt_box, cfg, rng)?;

    // occluders go on before cropping so labels and pixels agree exactly
    let (occluded_img, labeled_lms) = match occluders.pick(rng) {
        Some(occ) => {
            let placement = sample_occluder_placement(occ, &gt_box, rng);
            composite_occluder(&rotated, &rotated_lms, occ, &placement)
        }
        None => (rotated, rotated_lms),
    };

    let crop = crop_resize(&occluded_img, &window, INPUT_SIZE)?;
    let mut input_lms = labeled_lms;
    input_lms.map_points(|p| map_point(p, CoordFrame::Original(window), CoordFrame::Input));

    let flipped = rng.random_bool(0.5);
    let (final_img, final_lms) = if flipped {
        flip_horizontal(&crop, &input_lms)
    } else {
        (crop, input_lms)
    };

    let labels = if encode_labels {
        let mut score_lms = final_lms.clone();
        score_lms.map_points(|p| map_point(p, CoordFrame::Input, CoordFrame::Score));
        // landmarks cropped out of the window get an empty map
        let size = facemark::geometry::SCORE_SIZE as f64;
        let maps = score_lms
            .points
            .iter()
            .zip(&score_lms.occ_flag)
            .map(|(p, &occ)| {
                if p.x >= 0.0 && p.x < size && p.y >= 0.0 && p.y < size {
                    facemark::heatmap::Heatmap::gaussian(*p, params.sigma, if occ { -1.0 } else { 1.0 })
                } else {
                    facemark::heatmap::Heatmap::zero()
                }
            })
            .collect();
        Some(HeatmapStack::new(maps)?)
    } else {
        None
    };

    Ok((final_img, final_lms, window, angle, flipped, labels))
}

pub fn run(args: AugmentArgs) -> Result<()> {
    let cfg = Config::load(args.common.config.as_deref())?;
    if args.image.len() != args.pts.len() {
        bail!(
            "{} images but {} pts files; they pair one-to-one",
            args.image.len(),
            args.pts.len()
        );
    }
    let sampler = SamplerConfig {
        pos_per_face: cfg.resolve_usize(args.pos_per_face, "pos-per-face", 90)?,
        neg_per_image: cfg.resolve_usize(args.neg_per_image, "neg-per-image", 60)?,
        roll_range: cfg.resolve_f64(args.roll_range, "roll-range", 15.0)?,
        ..SamplerConfig::default()
    };
    let params = EncodeParams {
        sigma: cfg.resolve_f64(args.sigma, "sigma", 1.5)?,
    };
    let seed = cfg.resolve_u64(args.common.seed, "seed", 0)?;

    let occluders = match &args.occluders {
        Some(dir) => load_occluders(dir)?,
        None => OccluderLibrary::new(),
    };
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let mut manifest = Vec::new();
    for (img_idx, (img_path, pts_path)) in args.image.iter().zip(&args.pts).enumerate() {
        let (raw, _) = facemark::formats::load_png(img_path)?;
        let points = facemark::formats::read_pts(pts_path)?;
        let lms = LandmarkSet::from_points(points)?;

        // the whole frame is equalized once, before any sampling
        let frame = clahe(&raw, DEFAULT_CLIP_LIMIT, DEFAULT_TILES)?;
        let level_angle = roll_leveling_angle(&lms)?;
        let stem = img_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("img{img_idx}"));

        for s in 0..sampler.pos_per_face {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((img_idx as u64) << 32 | s as u64);
            let (img, lms_out, window, angle, flipped, labels) = positive_sample(
                &frame,
                &lms,
                level_angle,
                &occluders,
                &sampler,
                &params,
                args.encode_labels,
                &mut rng,
            )?;

            let name = format!("{stem}_pos_{s:04}");
            facemark::formats::save_png(&args.out_dir.join(format!("{name}.png")), &img)?;
            facemark::formats::write_pts(
                &args.out_dir.join(format!("{name}.pts")),
                &lms_out.points,
            )?;
            let heatmap = labels
                .map(|stack| -> Result<String> {
                    let file = format!("{name}.ohm");
                    facemark::formats::write_heatmap_stack(&args.out_dir.join(&file), &stack)?;
                    Ok(file)
                })
                .transpose()?;
            manifest.push(json!({
                "sample": format!("{name}.png"),
                "kind": "pos",
                "source": img_path.to_string_lossy(),
                "window": [window.x, window.y, window.w, window.h],
                "angle": angle,
                "flipped": flipped,
                "pts": format!("{name}.pts"),
                "occ_flags": lms_out.occ_flag,
                "heatmap": heatmap,
            }));
        }

        let gt_box = rect_from_landmarks(&lms.points)?;
        for s in 0..sampler.neg_per_image {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1 << 48 | (img_idx as u64) << 32 | s as u64);
            let window = sample_negative(
                (frame.width(), frame.height()),
                std::slice::from_ref(&gt_box),
                &sampler,
                &mut rng,
            )?;
            let crop = crop_resize(&frame, &window, INPUT_SIZE)?;
            let name = format!("{stem}_neg_{s:04}");
            facemark::formats::save_png(&args.out_dir.join(format!("{name}.png")), &crop)?;
            let heatmap = if args.encode_labels {
                let file = format!("{name}.ohm");
                facemark::formats::write_heatmap_stack(
                    &args.out_dir.join(&file),
                    &HeatmapStack::zero(),
                )?;
                Some(file)
            } else {
                None
            };
            manifest.push(json!({
                "sample": format!("{name}.png"),
                "kind": "neg",
                "source": img_path.to_string_lossy(),
                "window": [window.x, window.y, window.w, window.h],
                "heatmap": heatmap,
            }));
        }
    }

    let manifest_path = args.out_dir.join("manifest.jsonl");
    let mut text = String::new();
    for entry in &manifest {
        text.push_str(&serde_json::to_string(entry)?);
        text.push('\n');
    }
    std::fs::write(&manifest_path, text)?;
    eprintln!(
        "augment: {} samples from {} images -> {}",
        manifest.len(),
        args.image.len(),
        args.out_dir.display()
    );
    Ok(())
}
