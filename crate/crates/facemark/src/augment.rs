//! Training-sample generation: roll derotation, positive/negative window
//! sampling with IOU constraints, synthetic occluder compositing with
//! automatic occlusion labels, and a noisy heatmap predictor that stands in
//! for the network when exercising the rest of the pipeline.
//!
//! All randomness flows through a caller-supplied RNG, so identical seeds
//! replay identical samples.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{iou, rect_from_landmarks, Point2, Rect};
use crate::heatmap::{Heatmap, HeatmapStack, EncodeParams};
use crate::imaging::{rotate, Image};
use crate::landmarks::{LandmarkSet, NUM_LANDMARKS, SYMMETRIC_PAIRS};

/// Window-sampling configuration. Positive windows keep at least
/// `pos_min_iou` overlap with the ground-truth box; negative windows stay
/// under `neg_max_iou` against every face.
#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    pub pos_min_iou: f64,
    pub neg_max_iou: f64,
    /// Uniform roll augmentation range in degrees.
    pub roll_range: f64,
    pub pos_per_face: usize,
    pub neg_per_image: usize,
    /// Top extension of the landmark-derived ground-truth box.
    pub top_extend: f64,
    /// Rejection-sampling budget per window.
    pub budget: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            pos_min_iou: 0.7,
            neg_max_iou: 0.05,
            roll_range: 15.0,
            pos_per_face: 90,
            neg_per_image: 60,
            top_extend: 0.2,
            budget: 10_000,
        }
    }
}

/// The rotation angle (degrees) that best levels the face: it minimizes the
/// summed squared vertical difference over the left/right symmetric landmark
/// pairs. Errors when every pair is coincident.
pub fn roll_leveling_angle(lms: &LandmarkSet) -> Result<f64> {
    let mut sum_xy = 0.0;
    let mut sum_xx_minus_yy = 0.0;
    let mut extent = 0.0;
    for &(l, r) in &SYMMETRIC_PAIRS {
        let dx = lms.points[r].x - lms.points[l].x;
        let dy = lms.points[r].y - lms.points[l].y;
        sum_xy += dx * dy;
        sum_xx_minus_yy += dx * dx - dy * dy;
        extent += dx * dx + dy * dy;
    }
    if extent <= 1e-12 {
        return Err(Error::DegeneratePairs);
    }
    Ok((-0.5 * (2.0 * sum_xy).atan2(sum_xx_minus_yy)).to_degrees())
}

/// Level the face: rotate image and landmarks about the image center by the
/// angle from [`roll_leveling_angle`]. Returns the applied angle in degrees.
pub fn derotate_roll(img: &Image, lms: &LandmarkSet) -> Result<(Image, LandmarkSet, f64)> {
    let angle = roll_leveling_angle(lms)?;
    let center = Point2::new(img.width() as f64 / 2.0, img.height() as f64 / 2.0);
    let (out_img, out_lms) = rotate(img, angle, center, lms);
    Ok((out_img, out_lms, angle))
}

/// Residual the derotation minimizes; exposed for tests.
pub fn pair_leveling_residual(lms: &LandmarkSet) -> f64 {
    SYMMETRIC_PAIRS
        .iter()
        .map(|&(l, r)| {
            let dy = lms.points[r].y - lms.points[l].y;
            dy * dy
        })
        .sum()
}

/// Draw a square window keeping at least `cfg.pos_min_iou` IOU with the
/// ground-truth box. Rejection-sampled; errors when the budget runs out
/// (possible only for pathological box aspect ratios).
pub fn sample_positive(gt: &Rect, cfg: &SamplerConfig, rng: &mut impl Rng) -> Result<Rect> {
    let base = gt.w.max(gt.h);
    let center = gt.center();
    for _ in 0..cfg.budget {
        let side = base * rng.random_range(0.75..1.3);
        let cx = center.x + rng.random_range(-0.25..0.25) * base;
        let cy = center.y + rng.random_range(-0.25..0.25) * base;
        let candidate = Rect::new(cx - side / 2.0, cy - side / 2.0, side, side)?;
        if iou(&candidate, gt) >= cfg.pos_min_iou {
            return Ok(candidate);
        }
    }
    Err(Error::SamplerBudget(cfg.budget))
}

/// Draw a square window inside the image with IOU below `cfg.neg_max_iou`
/// against every ground-truth box.
pub fn sample_negative(
    image_dims: (usize, usize),
    gt_boxes: &[Rect],
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<Rect> {
    let (w, h) = (image_dims.0 as f64, image_dims.1 as f64);
    let max_side = w.min(h);
    if max_side < 2.0 {
        return Err(Error::SamplerBudget(0));
    }
    let min_side = (0.1 * max_side).max(1.0);
    for _ in 0..cfg.budget {
        let side = rng.random_range(min_side..=max_side);
        let x = rng.random_range(0.0..=(w - side));
        let y = rng.random_range(0.0..=(h - side));
        let candidate = Rect::new(x, y, side, side)?;
        if gt_boxes.iter().all(|gt| iou(&candidate, gt) < cfg.neg_max_iou) {
            return Ok(candidate);
        }
    }
    Err(Error::SamplerBudget(cfg.budget))
}

/// An occluder image with a transparency mask (RGBA) and a category tag.
#[derive(Debug, Clone)]
pub struct Occluder {
    pub rgb: Image,
    /// Per-pixel opacity in 0..=255, same dimensions as `rgb`.
    pub alpha: Vec<u8>,
    pub category: String,
}

impl Occluder {
    pub fn new(rgb: Image, alpha: Vec<u8>, category: impl Into<String>) -> Result<Self> {
        if alpha.len() != rgb.width() * rgb.height() {
            return Err(Error::ImageShape {
                len: alpha.len(),
                width: rgb.width(),
                height: rgb.height(),
                channels: 1,
            });
        }
        Ok(Occluder {
            rgb,
            alpha,
            category: category.into(),
        })
    }

    /// Bilinear alpha sample in source coordinates, 0..=1, zero outside.
    fn alpha_at(&self, x: f64, y: f64) -> f64 {
        let (w, h) = (self.rgb.width(), self.rgb.height());
        if x < 0.0 || y < 0.0 || x >= w as f64 || y >= h as f64 {
            return 0.0;
        }
        let gx = x - 0.5;
        let gy = y - 0.5;
        let x0 = gx.floor();
        let y0 = gy.floor();
        let fx = gx - x0;
        let fy = gy - y0;
        let cl = |v: f64, hi: usize| (v.max(0.0) as usize).min(hi - 1);
        let (x0c, x1c) = (cl(x0, w), cl(x0 + 1.0, w));
        let (y0c, y1c) = (cl(y0, h), cl(y0 + 1.0, h));
        let a = |xx: usize, yy: usize| self.alpha[yy * w + xx] as f64 / 255.0;
        a(x0c, y0c) * (1.0 - fx) * (1.0 - fy)
            + a(x1c, y0c) * fx * (1.0 - fy)
            + a(x0c, y1c) * (1.0 - fx) * fy
            + a(x1c, y1c) * fx * fy
    }
}

/// A set of occluders grouped by category. Selection is two-stage uniform:
/// first a category, then an instance within it, so over-represented
/// categories do not dominate.
#[derive(Debug, Clone, Default)]
pub struct OccluderLibrary {
    categories: Vec<(String, Vec<Occluder>)>,
}

impl OccluderLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, occ: Occluder) {
        match self.categories.iter_mut().find(|(c, _)| *c == occ.category) {
            Some((_, v)) => v.push(occ),
            None => self.categories.push((occ.category.clone(), vec![occ])),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn len(&self) -> usize {
        self.categories.iter().map(|(_, v)| v.len()).sum()
    }

    pub fn pick(&self, rng: &mut impl Rng) -> Option<&Occluder> {
        if self.categories.is_empty() {
            return None;
        }
        let (_, instances) = &self.categories[rng.random_range(0..self.categories.len())];
        Some(&instances[rng.random_range(0..instances.len())])
    }
}

/// Fraction of face-box width spanned by a sampled occluder, lower bound.
pub const OCCLUDER_SCALE_MIN: f64 = 0.15;
/// Fraction of face-box width spanned by a sampled occluder, upper bound.
pub const OCCLUDER_SCALE_MAX: f64 = 0.60;

/// Draw a placement box for an occluder over a face box: width uniform in
/// [15%, 60%] of the face width, aspect preserved, center uniform over the
/// face box.
pub fn sample_occluder_placement(occ: &Occluder, face_box: &Rect, rng: &mut impl Rng) -> Rect {
    let w = face_box.w * rng.random_range(OCCLUDER_SCALE_MIN..OCCLUDER_SCALE_MAX);
    let h = w * occ.rgb.height() as f64 / occ.rgb.width() as f64;
    let cx = face_box.x + rng.random_range(0.0..1.0) * face_box.w;
    let cy = face_box.y + rng.random_range(0.0..1.0) * face_box.h;
    Rect::new(cx - w / 2.0, cy - h / 2.0, w.max(1.0), h.max(1.0)).expect("positive dims")
}

/// Alpha-composite an occluder scaled into `placement` onto the face image.
/// Every landmark whose location is covered with alpha above 0.5 gets its
/// occlusion flag set; existing flags are kept. Deterministic given the
/// placement.
pub fn composite_occluder(
    face: &Image,
    lms: &LandmarkSet,
    occ: &Occluder,
    placement: &Rect,
) -> (Image, LandmarkSet) {
    let mut out = face.clone();
    let sx = occ.rgb.width() as f64 / placement.w;
    let sy = occ.rgb.height() as f64 / placement.h;

    let x0 = placement.x.floor().max(0.0) as usize;
    let y0 = placement.y.floor().max(0.0) as usize;
    let x1 = (placement.right().ceil() as usize).min(face.width());
    let y1 = (placement.bottom().ceil() as usize).min(face.height());
    for y in y0..y1 {
        for x in x0..x1 {
            // occluder source position of this face pixel center
            let ox = ((x as f64 + 0.5) - placement.x) * sx;
            let oy = ((y as f64 + 0.5) - placement.y) * sy;
            let a = occ.alpha_at(ox, oy);
            if a <= 0.0 {
                continue;
            }
            for c in 0..face.channels() {
                let oc = if occ.rgb.channels() == 1 { 0 } else { c.min(occ.rgb.channels() - 1) };
                let fg = occ.rgb.sample_bilinear(ox, oy, oc);
                let bg = out.get(x, y, c) as f64;
                out.set(x, y, c, (a * fg + (1.0 - a) * bg).round().clamp(0.0, 255.0) as u8);
            }
        }
    }

    let mut labeled = lms.clone();
    for i in 0..NUM_LANDMARKS {
        let p = labeled.points[i];
        let ox = (p.x - placement.x) * sx;
        let oy = (p.y - placement.y) * sy;
        if occ.alpha_at(ox, oy) > 0.5 {
            labeled.occ_flag[i] = true;
        }
    }
    (out, labeled)
}

/// Noise model for the synthetic heatmap predictor.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    /// Additive Gaussian noise per heatmap cell.
    pub pixel_noise_sigma: f64,
    /// Gaussian jitter of the blob center, in score pixels.
    pub center_jitter_sigma: f64,
    /// Uniform amplitude scale range; the sign always follows the flag.
    pub amplitude_scale: (f64, f64),
    /// Probability a landmark's map is zeroed entirely.
    pub dropout_prob: f64,
}

impl NoiseModel {
    /// Exact reproduction of the encoder.
    pub fn noiseless() -> Self {
        NoiseModel {
            pixel_noise_sigma: 0.0,
            center_jitter_sigma: 0.0,
            amplitude_scale: (1.0, 1.0),
            dropout_prob: 0.0,
        }
    }
}

/// What the synthetic predictor actually encoded for one landmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizedLandmark {
    /// Jittered blob center, clamped to the grid.
    pub center: Point2,
    /// Signed amplitude used for the blob.
    pub amplitude: f64,
}

/// Stand-in for the network: encode every ground-truth landmark (score-frame
/// coordinates, occlusion flags as states) with a jittered center, a scaled
/// amplitude of preserved sign, additive cell noise and optional dropout.
/// With [`NoiseModel::noiseless`] the result equals the plain encoder's
/// output exactly. Landmarks outside the 64x64 frame fell outside the crop
/// and produce an empty map, like a dropout. Also returns what was actually
/// encoded per landmark (`None` for dropped maps) so callers can measure
/// decode error against it.
pub fn synth_predict(
    gt: &LandmarkSet,
    noise: &NoiseModel,
    params: &EncodeParams,
    rng: &mut impl Rng,
) -> Result<(HeatmapStack, Vec<Option<RealizedLandmark>>)> {
    let jitter = Normal::new(0.0, noise.center_jitter_sigma.max(f64::MIN_POSITIVE))
        .expect("finite jitter sigma");
    let cell_noise = Normal::new(0.0, noise.pixel_noise_sigma.max(f64::MIN_POSITIVE))
        .expect("finite pixel sigma");
    let size = crate::geometry::SCORE_SIZE as f64;

    let mut maps = Vec::with_capacity(NUM_LANDMARKS);
    let mut realized = Vec::with_capacity(NUM_LANDMARKS);
    for i in 0..gt.len() {
        if noise.dropout_prob > 0.0 && rng.random_bool(noise.dropout_prob.min(1.0)) {
            maps.push(Heatmap::zero());
            realized.push(None);
            continue;
        }
        let p = gt.points[i];
        if !(p.x >= 0.0 && p.x < size && p.y >= 0.0 && p.y < size) {
            maps.push(Heatmap::zero());
            realized.push(None);
            continue;
        }
        let center = if noise.center_jitter_sigma > 0.0 {
            Point2::new(
                (p.x + jitter.sample(rng)).clamp(0.0, size - 1e-6),
                (p.y + jitter.sample(rng)).clamp(0.0, size - 1e-6),
            )
        } else {
            p
        };
        let scale = if noise.amplitude_scale.0 == noise.amplitude_scale.1 {
            noise.amplitude_scale.0
        } else {
            rng.random_range(noise.amplitude_scale.0..noise.amplitude_scale.1)
        };
        let amplitude = if gt.occ_flag[i] { -scale } else { scale };
        let mut map = Heatmap::gaussian(center, params.sigma, amplitude);
        if noise.pixel_noise_sigma > 0.0 {
            for v in map.data_mut() {
                *v += cell_noise.sample(rng) as f32;
            }
        }
        maps.push(map);
        realized.push(Some(RealizedLandmark { center, amplitude }));
    }
    Ok((HeatmapStack::new(maps)?, realized))
}

/// Positive window that additionally contains every landmark with a margin
/// of one score pixel, the way a working face detector frames a face. A
/// window that cuts landmarks off would leave only truncated blob tails in
/// the score grid.
pub fn sample_covering_positive(
    gt_box: &Rect,
    points: &[Point2],
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<Rect> {
    for _ in 0..cfg.budget {
        let window = sample_positive(gt_box, cfg, rng)?;
        let margin = window.w / crate::geometry::SCORE_SIZE as f64;
        let inner = Rect {
            x: window.x + margin,
            y: window.y + margin,
            w: window.w - 2.0 * margin,
            h: window.h - 2.0 * margin,
        };
        if points.iter().all(|p| inner.contains(p)) {
            return Ok(window);
        }
    }
    Err(Error::SamplerBudget(cfg.budget))
}

/// Jittered copies of a ground-truth face: face-covering positive windows
/// plus a noisy synthetic stack per window, the raw material for fusion.
pub fn synth_detections(
    gt_original: &LandmarkSet,
    count: usize,
    noise: &NoiseModel,
    cfg: &SamplerConfig,
    params: &EncodeParams,
    rng: &mut impl Rng,
) -> Result<Vec<crate::scoring::Detection>> {
    let gt_box = rect_from_landmarks(&gt_original.points)?;
    let mut dets = Vec::with_capacity(count);
    for _ in 0..count {
        let window = sample_covering_positive(&gt_box, &gt_original.points, cfg, rng)?;
        let mut score_lms = gt_original.clone();
        score_lms.map_points(|p| {
            crate::geometry::map_point(
                p,
                crate::geometry::CoordFrame::Original(window),
                crate::geometry::CoordFrame::Score,
            )
        });
        let (stack, _) = synth_predict(&score_lms, noise, params, rng)?;
        dets.push(crate::scoring::Detection {
            rect: window,
            det_score: 1.0,
            stack,
        });
    }
    Ok(dets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatmap::{decode, encode_stack};
    use crate::landmarks::canonical_face;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn level_face() -> (Image, LandmarkSet) {
        let img = Image::filled(256, 256, 1, 120).unwrap();
        let lms = canonical_face(Point2::new(128.0, 128.0), 120.0);
        (img, lms)
    }

    #[test]
    fn derotate_level_face_is_zero() {
        let (img, lms) = level_face();
        let (_, _, angle) = derotate_roll(&img, &lms).unwrap();
        assert!(angle.abs() < 1e-6, "angle {angle}");
    }

    #[test]
    fn derotate_recovers_applied_roll() {
        let (img, lms) = level_face();
        let center = Point2::new(128.0, 128.0);
        let (rot_img, rot_lms) = rotate(&img, 10.0, center, &lms);
        let (_, out_lms, angle) = derotate_roll(&rot_img, &rot_lms).unwrap();
        assert!((angle + 10.0).abs() < 0.01, "angle {angle}");
        // second application is a no-op
        let (_, _, second) = derotate_roll(&img, &out_lms).unwrap();
        assert!(second.abs() < 1e-6, "second {second}");
    }

    #[test]
    fn derotate_minimizes_pair_residual() {
        let (img, lms) = level_face();
        let (rot_img, rot_lms) = rotate(&img, -7.3, Point2::new(100.0, 90.0), &lms);
        let before = pair_leveling_residual(&rot_lms);
        let (_, leveled, _) = derotate_roll(&rot_img, &rot_lms).unwrap();
        let after = pair_leveling_residual(&leveled);
        assert!(after < before * 1e-6, "before {before}, after {after}");
    }

    #[test]
    fn derotate_degenerate_pairs_errors() {
        let img = Image::filled(8, 8, 1, 0).unwrap();
        let lms = LandmarkSet::from_points(vec![Point2::new(4.0, 4.0); NUM_LANDMARKS]).unwrap();
        assert!(matches!(derotate_roll(&img, &lms), Err(Error::DegeneratePairs)));
    }

    #[test]
    fn positive_samples_satisfy_iou() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = SamplerConfig::default();
        // face boxes are taller than wide; every draw honors the bound
        let gt = Rect::new(40.0, 30.0, 100.0, 120.0).unwrap();
        for _ in 0..2000 {
            let b = sample_positive(&gt, &cfg, &mut rng).unwrap();
            assert!(iou(&b, &gt) >= cfg.pos_min_iou);
        }
        // against a square ground truth the accepted overlaps span the whole
        // admissible interval (a square window cannot reach iou 1 otherwise)
        let square = Rect::new(40.0, 30.0, 100.0, 100.0).unwrap();
        let mut min_seen = 1.0f64;
        let mut max_seen = 0.0f64;
        for _ in 0..2000 {
            let b = sample_positive(&square, &cfg, &mut rng).unwrap();
            let v = iou(&b, &square);
            assert!(v >= cfg.pos_min_iou);
            min_seen = min_seen.min(v);
            max_seen = max_seen.max(v);
        }
        assert!(min_seen < 0.75, "min {min_seen}");
        assert!(max_seen > 0.9, "max {max_seen}");
    }

    #[test]
    fn positive_sampler_gives_up_on_pathological_aspect() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = SamplerConfig {
            budget: 200,
            ..SamplerConfig::default()
        };
        let sliver = Rect::new(0.0, 0.0, 300.0, 10.0).unwrap();
        assert!(matches!(
            sample_positive(&sliver, &cfg, &mut rng),
            Err(Error::SamplerBudget(_))
        ));
    }

    #[test]
    fn negative_samples_avoid_faces() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = SamplerConfig::default();
        let gts = [
            Rect::new(50.0, 50.0, 80.0, 80.0).unwrap(),
            Rect::new(300.0, 200.0, 60.0, 70.0).unwrap(),
        ];
        for _ in 0..2000 {
            let b = sample_negative((640, 480), &gts, &cfg, &mut rng).unwrap();
            for gt in &gts {
                assert!(iou(&b, gt) < cfg.neg_max_iou);
            }
            assert!(b.x >= 0.0 && b.y >= 0.0 && b.right() <= 640.0 && b.bottom() <= 480.0);
        }
    }

    #[test]
    fn negative_sampler_without_faces_accepts_anything() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = SamplerConfig::default();
        assert!(sample_negative((100, 100), &[], &cfg, &mut rng).is_ok());
    }

    fn checker_occluder(opaque: bool, category: &str) -> Occluder {
        let rgb = Image::filled(8, 8, 3, 30).unwrap();
        let alpha = vec![if opaque { 255 } else { 0 }; 64];
        Occluder::new(rgb, alpha, category).unwrap()
    }

    #[test]
    fn transparent_occluder_changes_nothing() {
        let (img, lms) = level_face();
        let occ = checker_occluder(false, "object");
        let placement = Rect::new(100.0, 100.0, 60.0, 60.0).unwrap();
        let (out, labeled) = composite_occluder(&img, &lms, &occ, &placement);
        assert_eq!(out, img);
        assert_eq!(labeled, lms);
    }

    #[test]
    fn opaque_mouth_occluder_flags_exactly_mouth() {
        let (img, lms) = level_face();
        let occ = checker_occluder(true, "hand");
        // tight box around the mouth landmarks only
        let mouth_pts: Vec<Point2> = (48..68).map(|i| lms.points[i]).collect();
        let tight = crate::geometry::tight_rect(&mouth_pts).unwrap();
        let placement = Rect::new(tight.x - 1.0, tight.y - 1.0, tight.w + 2.0, tight.h + 2.0).unwrap();
        let (out, labeled) = composite_occluder(&img, &lms, &occ, &placement);
        for i in 0..NUM_LANDMARKS {
            assert_eq!(labeled.occ_flag[i], (48..68).contains(&i), "landmark {i}");
        }
        // the covered pixels took the occluder color
        let c = placement.center();
        assert_eq!(out.get(c.x as usize, c.y as usize, 0), 30);
    }

    #[test]
    fn opaque_full_face_occluder_flags_all() {
        let (img, lms) = level_face();
        let occ = checker_occluder(true, "object");
        let placement = Rect::new(0.0, 0.0, 256.0, 256.0).unwrap();
        let (_, labeled) = composite_occluder(&img, &lms, &occ, &placement);
        assert!(labeled.occ_flag.iter().all(|&f| f));
    }

    #[test]
    fn library_two_stage_pick_balances_categories() {
        let mut lib = OccluderLibrary::new();
        // category A has 20 instances, B has 1; two-stage pick should still
        // choose B about half the time
        for _ in 0..20 {
            lib.add(checker_occluder(true, "a"));
        }
        lib.add(checker_occluder(true, "b"));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut b_count = 0;
        for _ in 0..1000 {
            if lib.pick(&mut rng).unwrap().category == "b" {
                b_count += 1;
            }
        }
        assert!((400..600).contains(&b_count), "b picked {b_count}/1000");
    }

    #[test]
    fn synth_noiseless_equals_encoder() {
        let mut gt = canonical_face(Point2::new(32.0, 32.0), 40.0);
        gt.occ_flag[12] = true;
        let params = EncodeParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (stack, realized) =
            synth_predict(&gt, &NoiseModel::noiseless(), &params, &mut rng).unwrap();
        let expected = encode_stack(&gt, &params).unwrap();
        assert_eq!(stack, expected);
        assert!(realized.iter().all(|r| r.is_some()));
    }

    #[test]
    fn synth_full_dropout_is_zero_stack() {
        let gt = canonical_face(Point2::new(32.0, 32.0), 40.0);
        let noise = NoiseModel {
            dropout_prob: 1.0,
            ..NoiseModel::noiseless()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (stack, realized) =
            synth_predict(&gt, &noise, &EncodeParams::default(), &mut rng).unwrap();
        assert_eq!(stack.max_abs(), 0.0);
        assert!(realized.iter().all(|r| r.is_none()));
    }

    #[test]
    fn synth_decodes_under_pixel_noise() {
        let gt = canonical_face(Point2::new(32.0, 32.0), 40.0);
        let noise = NoiseModel {
            pixel_noise_sigma: 0.05,
            ..NoiseModel::noiseless()
        };
        let params = EncodeParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut within = 0usize;
        let mut total = 0usize;
        for _ in 0..15 {
            let (stack, realized) = synth_predict(&gt, &noise, &params, &mut rng).unwrap();
            for (map, real) in stack.maps().iter().zip(&realized) {
                let d = decode(map).unwrap();
                total += 1;
                if d.location.distance(&real.unwrap().center) < 0.5 {
                    within += 1;
                }
            }
        }
        assert!(within as f64 / total as f64 >= 0.99, "{within}/{total}");
    }

    #[test]
    fn identical_seeds_replay_identically() {
        let gt = canonical_face(Point2::new(30.0, 30.0), 35.0);
        let noise = NoiseModel {
            pixel_noise_sigma: 0.02,
            center_jitter_sigma: 0.3,
            amplitude_scale: (0.8, 1.0),
            dropout_prob: 0.1,
        };
        let params = EncodeParams::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            synth_predict(&gt, &noise, &params, &mut rng).unwrap()
        };
        let (a, ra) = run();
        let (b, rb) = run();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }
}
