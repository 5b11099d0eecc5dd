use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use facemark::augment::{sample_covering_positive, synth_predict, NoiseModel, SamplerConfig};
use facemark::formats::DetectionRecord;
use facemark::geometry::{map_point, rect_from_landmarks, CoordFrame};
use facemark::heatmap::EncodeParams;
use facemark::landmarks::LandmarkSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Ground truth: one .jsonl of records with landmarks, or any number of
    /// .pts files (one face each).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory for heatmap containers.
    #[arg(long)]
    heatmap_dir: PathBuf,
    /// Output detections JSONL.
    #[arg(long)]
    out: PathBuf,
    /// Also write the (possibly randomly occluded) ground truth as JSONL.
    #[arg(long)]
    gt_out: Option<PathBuf>,
    /// Synthetic detections per face: the first uses the padded ground-truth
    /// box, the rest are sampled face-covering positive windows.
    #[arg(long, default_value_t = 1)]
    dets_per_face: usize,
    /// Additive Gaussian noise per heatmap cell.
    #[arg(long)]
    noise_pixel: Option<f64>,
    /// Gaussian jitter of blob centers, score pixels.
    #[arg(long)]
    jitter: Option<f64>,
    /// Lower bound of the uniform amplitude scale.
    #[arg(long)]
    amp_lo: Option<f64>,
    /// Upper bound of the uniform amplitude scale.
    #[arg(long)]
    amp_hi: Option<f64>,
    /// Probability a landmark map is zeroed.
    #[arg(long)]
    dropout: Option<f64>,
    /// For inputs without occlusion flags: probability each landmark is
    /// marked occluded in the generated ground truth.
    #[arg(long)]
    random_occlude: Option<f64>,
    /// Gaussian blob standard deviation in score pixels.
    #[arg(long)]
    sigma: Option<f64>,
    #[command(flatten)]
    common: crate::Common,
}

fn load_ground_truth(inputs: &[PathBuf]) -> Result<Vec<(String, LandmarkSet)>> {
    if inputs.len() == 1 && inputs[0].extension().is_some_and(|e| e == "jsonl") {
        let records = facemark::formats::read_jsonl(&inputs[0])?;
        let mut faces = Vec::new();
        for (i, rec) in records.iter().enumerate() {
            let lms = rec.landmark_set().with_context(|| {
                format!("{}: record {} has no 68-point landmarks", inputs[0].display(), i + 1)
            })?;
            faces.push((rec.image.clone(), lms));
        }
        Ok(faces)
    } else {
        let mut faces = Vec::new();
        for path in inputs {
            if path.extension().is_some_and(|e| e == "jsonl") {
                bail!("mix of .jsonl and .pts inputs; pass either one .jsonl or .pts files");
            }
            let points = facemark::formats::read_pts(path)?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            faces.push((name, LandmarkSet::from_points(points)?));
        }
        Ok(faces)
    }
}

pub fn run(args: SynthArgs) -> Result<()> {
    let cfg = Config::load(args.common.config.as_deref())?;
    let params = EncodeParams {
        sigma: cfg.resolve_f64(args.sigma, "sigma", 1.5)?,
    };
    let noise = NoiseModel {
        pixel_noise_sigma: cfg.resolve_f64(args.noise_pixel, "noise-pixel", 0.0)?,
        center_jitter_sigma: cfg.resolve_f64(args.jitter, "jitter", 0.0)?,
        amplitude_scale: (
            cfg.resolve_f64(args.amp_lo, "amp-lo", 1.0)?,
            cfg.resolve_f64(args.amp_hi, "amp-hi", 1.0)?,
        ),
        dropout_prob: cfg.resolve_f64(args.dropout, "dropout", 0.0)?,
    };
    let random_occlude = cfg.resolve_f64(args.random_occlude, "random-occlude", 0.0)?;
    let seed = cfg.resolve_u64(args.common.seed, "seed", 0)?;
    let sampler = SamplerConfig::default();

    if args.dets_per_face == 0 {
        bail!("--dets-per-face must be at least 1");
    }
    std::fs::create_dir_all(&args.heatmap_dir)
        .with_context(|| format!("creating {}", args.heatmap_dir.display()))?;

    let mut faces = load_ground_truth(&args.inputs)?;
    let mut detections = Vec::new();
    let mut gt_records = Vec::new();

    for (face_idx, (image, lms)) in faces.iter_mut().enumerate() {
        // one RNG stream per face keeps output independent of face order
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(face_idx as u64);

        if random_occlude > 0.0 {
            for flag in &mut lms.occ_flag {
                if rng.random_bool(random_occlude.min(1.0)) {
                    *flag = true;
                }
            }
        }

        let gt_box = rect_from_landmarks(&lms.points)?;
        let mut gt_rec = DetectionRecord::new(image.clone(), &gt_box, 1.0);
        gt_rec.set_landmarks(lms);
        gt_records.push(gt_rec);

        for k in 0..args.dets_per_face {
            let window = if k == 0 {
                gt_box.padded(0.1)
            } else {
                sample_covering_positive(&gt_box, &lms.points, &sampler, &mut rng)?
            };
            let mut score_lms = lms.clone();
            score_lms
                .map_points(|p| map_point(p, CoordFrame::Original(window), CoordFrame::Score));
            let (stack, _) = synth_predict(&score_lms, &noise, &params, &mut rng)?;

            let file = format!("{image}_{k}.ohm");
            let path = args.heatmap_dir.join(&file);
            facemark::formats::write_heatmap_stack(&path, &stack)?;

            let mut rec = DetectionRecord::new(image.clone(), &window, 1.0);
            rec.heatmap = Some(path.to_string_lossy().into_owned());
            detections.push(rec);
        }
    }

    facemark::formats::write_jsonl(&args.out, &detections)?;
    if let Some(gt_path) = &args.gt_out {
        facemark::formats::write_jsonl(gt_path, &gt_records)?;
    }
    eprintln!(
        "synth: {} detections over {} faces -> {}",
        detections.len(),
        gt_records.len(),
        args.out.display()
    );
    Ok(())
}
