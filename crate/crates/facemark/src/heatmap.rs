//! Signed Gaussian heatmap codec.
//!
//! A heatmap is a 64x64 grid of signed scores for one landmark. Encoding
//! places a Gaussian of amplitude +1 (visible) or -1 (occluded) at the
//! landmark location; non-face samples get an all-zero grid. The magnitude
//! carries location confidence, the sign carries visibility, so landmarks
//! stay localizable under occlusion.
//!
//! Grid cell `(x, y)` holds the Gaussian evaluated at the point `(x, y)` of
//! the score frame; a landmark at (32, 32) therefore encodes to exactly +1
//! at cell (32, 32).

use crate::error::{Error, Result};
use crate::geometry::{map_point, CoordFrame, Point2, Rect, SCORE_SIZE};
use crate::landmarks::{LandmarkSet, NUM_LANDMARKS};

/// Visibility state of a landmark for label generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandmarkState {
    Visible,
    Occluded,
    /// Non-face sample: the grid stays zero.
    Negative,
}

/// Gaussian label parameters. The amplitude is +1 for visible landmarks,
/// -1 for occluded ones and 0 for negatives.
#[derive(Debug, Clone, Copy)]
pub struct EncodeParams {
    /// Standard deviation of the blob in score pixels.
    pub sigma: f64,
}

impl Default for EncodeParams {
    fn default() -> Self {
        EncodeParams { sigma: 1.5 }
    }
}

/// One 64x64 signed score grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    data: Vec<f32>,
}

impl Default for Heatmap {
    fn default() -> Self {
        Self::zero()
    }
}

impl Heatmap {
    pub fn zero() -> Self {
        Heatmap {
            data: vec![0.0; SCORE_SIZE * SCORE_SIZE],
        }
    }

    pub fn from_data(data: Vec<f32>) -> Result<Self> {
        if data.len() != SCORE_SIZE * SCORE_SIZE {
            return Err(Error::ImageShape {
                len: data.len(),
                width: SCORE_SIZE,
                height: SCORE_SIZE,
                channels: 1,
            });
        }
        Ok(Heatmap { data })
    }

    /// Signed Gaussian blob of the given amplitude centered at `center`.
    pub fn gaussian(center: Point2, sigma: f64, amplitude: f64) -> Self {
        let inv = 1.0 / (2.0 * sigma * sigma);
        let mut data = Vec::with_capacity(SCORE_SIZE * SCORE_SIZE);
        for y in 0..SCORE_SIZE {
            let dy = y as f64 - center.y;
            for x in 0..SCORE_SIZE {
                let dx = x as f64 - center.x;
                data.push((amplitude * (-(dx * dx + dy * dy) * inv).exp()) as f32);
            }
        }
        Heatmap { data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * SCORE_SIZE + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * SCORE_SIZE + x] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    /// Bilinear sample of the signed grid at a continuous score-frame point.
    /// Cells outside the grid contribute zero.
    pub fn sample_bilinear(&self, p: Point2) -> f64 {
        let x0 = p.x.floor();
        let y0 = p.y.floor();
        let fx = p.x - x0;
        let fy = p.y - y0;
        let at = |x: f64, y: f64| -> f64 {
            if x < 0.0 || y < 0.0 || x >= SCORE_SIZE as f64 || y >= SCORE_SIZE as f64 {
                0.0
            } else {
                self.get(x as usize, y as usize) as f64
            }
        };
        at(x0, y0) * (1.0 - fx) * (1.0 - fy)
            + at(x0 + 1.0, y0) * fx * (1.0 - fy)
            + at(x0, y0 + 1.0) * (1.0 - fx) * fy
            + at(x0 + 1.0, y0 + 1.0) * fx * fy
    }
}

/// Encode one landmark into its score grid. Visible and occluded landmarks
/// must lie inside the 64x64 frame; negatives ignore the point entirely.
pub fn encode(p: Point2, state: LandmarkState, params: &EncodeParams) -> Result<Heatmap> {
    let amplitude = match state {
        LandmarkState::Visible => 1.0,
        LandmarkState::Occluded => -1.0,
        LandmarkState::Negative => return Ok(Heatmap::zero()),
    };
    let size = SCORE_SIZE as f64;
    if !(p.x >= 0.0 && p.x < size && p.y >= 0.0 && p.y < size) {
        return Err(Error::PointOutsideGrid {
            x: p.x,
            y: p.y,
            size: SCORE_SIZE,
        });
    }
    Ok(Heatmap::gaussian(p, params.sigma, amplitude))
}

/// 68 heatmaps, one per landmark in scheme order.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack {
    maps: Vec<Heatmap>,
}

impl HeatmapStack {
    pub fn new(maps: Vec<Heatmap>) -> Result<Self> {
        if maps.len() != NUM_LANDMARKS {
            return Err(Error::StackSize {
                expected: NUM_LANDMARKS,
                got: maps.len(),
            });
        }
        Ok(HeatmapStack { maps })
    }

    pub fn zero() -> Self {
        HeatmapStack {
            maps: (0..NUM_LANDMARKS).map(|_| Heatmap::zero()).collect(),
        }
    }

    pub fn maps(&self) -> &[Heatmap] {
        &self.maps
    }

    pub fn maps_mut(&mut self) -> &mut [Heatmap] {
        &mut self.maps
    }

    pub fn max_abs(&self) -> f32 {
        self.maps.iter().fold(0.0f32, |m, h| m.max(h.max_abs()))
    }
}

/// Encode a full landmark set (score-frame coordinates) into a stack,
/// taking the per-landmark state from the occlusion flags.
pub fn encode_stack(lms: &LandmarkSet, params: &EncodeParams) -> Result<HeatmapStack> {
    let maps = lms
        .points
        .iter()
        .zip(&lms.occ_flag)
        .map(|(p, &occ)| {
            let state = if occ {
                LandmarkState::Occluded
            } else {
                LandmarkState::Visible
            };
            encode(*p, state, params)
        })
        .collect::<Result<Vec<_>>>()?;
    HeatmapStack::new(maps)
}

/// 8-connected component labeling over a boolean mask. Labels start at 1 and
/// are ordered by each component's first pixel in row-major order; background
/// stays 0. Returns the label grid and the component count.
pub fn connected_components(mask: &[bool], width: usize, height: usize) -> (Vec<u32>, u32) {
    assert_eq!(mask.len(), width * height, "mask length mismatch");
    let mut parent: Vec<u32> = (0..mask.len() as u32).collect();

    fn root(parent: &mut [u32], mut i: u32) -> u32 {
        while parent[i as usize] != i {
            parent[i as usize] = parent[parent[i as usize] as usize];
            i = parent[i as usize];
        }
        i
    }
    fn union(parent: &mut [u32], a: u32, b: u32) {
        let (ra, rb) = (root(parent, a), root(parent, b));
        if ra != rb {
            // keep the smaller index as root so first-pixel order survives
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi as usize] = lo;
        }
    }

    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !mask[i] {
                continue;
            }
            // union with already-visited neighbors: W, NW, N, NE
            if x > 0 && mask[i - 1] {
                union(&mut parent, i as u32, (i - 1) as u32);
            }
            if y > 0 {
                let up = i - width;
                if mask[up] {
                    union(&mut parent, i as u32, up as u32);
                }
                if x > 0 && mask[up - 1] {
                    union(&mut parent, i as u32, (up - 1) as u32);
                }
                if x + 1 < width && mask[up + 1] {
                    union(&mut parent, i as u32, (up + 1) as u32);
                }
            }
        }
    }

    let mut labels = vec![0u32; mask.len()];
    let mut next = 0u32;
    let mut assigned: Vec<u32> = vec![0; mask.len()];
    for i in 0..mask.len() {
        if !mask[i] {
            continue;
        }
        let r = root(&mut parent, i as u32) as usize;
        if assigned[r] == 0 {
            next += 1;
            assigned[r] = next;
        }
        labels[i] = assigned[r];
    }
    (labels, next)
}

/// A decoded landmark: sub-pixel location in the score frame and the signed
/// heatmap value sampled there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoded {
    pub location: Point2,
    pub value: f64,
}

/// Recover a landmark from a heatmap: threshold the magnitude at 0.6 of its
/// maximum, label connected components, pick the component holding the
/// global magnitude maximum (row-major first on ties), and take the
/// magnitude-weighted centroid of its cells with the threshold level
/// subtracted from the weights. Subtracting the floor removes the skew a
/// hard cutoff imposes on the Gaussian tail, keeping sub-pixel accuracy
/// well under a tenth of a pixel. The signed value is read back by bilinear
/// interpolation at the centroid.
///
/// Returns `None` for an identically zero map: no landmark present.
pub fn decode(h: &Heatmap) -> Option<Decoded> {
    let max_abs = h.max_abs() as f64;
    if max_abs == 0.0 {
        return None;
    }
    let threshold = 0.6 * max_abs;
    let mask: Vec<bool> = h.data().iter().map(|v| (v.abs() as f64) >= threshold).collect();
    let (labels, _) = connected_components(&mask, SCORE_SIZE, SCORE_SIZE);

    // first row-major cell attaining the global max
    let peak = h
        .data()
        .iter()
        .enumerate()
        .find(|(_, v)| v.abs() as f64 == max_abs)
        .map(|(i, _)| i)
        .expect("max_abs > 0 implies a peak exists");
    let target = labels[peak];

    let (mut sw, mut sx, mut sy) = (0.0f64, 0.0f64, 0.0f64);
    for y in 0..SCORE_SIZE {
        for x in 0..SCORE_SIZE {
            let i = y * SCORE_SIZE + x;
            if labels[i] == target {
                let w = h.data()[i].abs() as f64 - threshold;
                sw += w;
                sx += w * x as f64;
                sy += w * y as f64;
            }
        }
    }
    let location = if sw > 0.0 {
        Point2::new(sx / sw, sy / sw)
    } else {
        // single cell exactly at the threshold
        Point2::new((peak % SCORE_SIZE) as f64, (peak / SCORE_SIZE) as f64)
    };
    let value = h.sample_bilinear(location);
    Some(Decoded { location, value })
}

/// Decode a full stack into a landmark set in original-image coordinates,
/// mapping each score-frame location through the detection box. Landmarks
/// whose map is all zero come back undetected. The signed raw value is
/// stored as the occlusion score.
pub fn decode_stack(stack: &HeatmapStack, det: &Rect) -> LandmarkSet {
    let mut lms = LandmarkSet::from_points(vec![Point2::default(); NUM_LANDMARKS])
        .expect("fixed-size point vector");
    for (i, map) in stack.maps().iter().enumerate() {
        match decode(map) {
            Some(d) => {
                lms.points[i] = map_point(d.location, CoordFrame::Score, CoordFrame::Original(*det));
                lms.occ_score[i] = d.value;
                lms.detected[i] = true;
            }
            None => {
                lms.detected[i] = false;
                lms.occ_score[i] = 0.0;
            }
        }
    }
    lms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rect_from_landmarks;
    use crate::landmarks::canonical_face;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn encode_visible_closed_form() {
        let h = encode(Point2::new(32.0, 32.0), LandmarkState::Visible, &EncodeParams::default())
            .unwrap();
        assert_eq!(h.get(32, 32), 1.0);
        let expected = (-1.0f64 / 4.5).exp() as f32;
        assert_relative_eq!(h.get(33, 32), expected, epsilon = 1e-6);
        assert_relative_eq!(h.get(32, 33), expected, epsilon = 1e-6);
    }

    #[test]
    fn encode_occluded_is_negated_visible() {
        let p = Point2::new(20.3, 41.7);
        let vis = encode(p, LandmarkState::Visible, &EncodeParams::default()).unwrap();
        let occ = encode(p, LandmarkState::Occluded, &EncodeParams::default()).unwrap();
        assert_eq!(occ.get(20, 42), -vis.get(20, 42));
        // magnitudes identical bitwise
        for (a, b) in vis.data().iter().zip(occ.data()) {
            assert_eq!(a.abs().to_bits(), b.abs().to_bits());
        }
        assert!(occ.sample_bilinear(p) < -0.8);
    }

    #[test]
    fn encode_negative_is_zero() {
        let h = encode(Point2::new(-50.0, 0.0), LandmarkState::Negative, &EncodeParams::default())
            .unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encode_outside_grid_errors() {
        let r = encode(Point2::new(64.0, 10.0), LandmarkState::Visible, &EncodeParams::default());
        assert!(matches!(r, Err(Error::PointOutsideGrid { .. })));
    }

    /// Brute-force flood fill, independent of the union-find implementation.
    fn flood_fill_components(mask: &[bool], w: usize, h: usize) -> (Vec<u32>, u32) {
        let mut labels = vec![0u32; mask.len()];
        let mut next = 0;
        for start in 0..mask.len() {
            if !mask[start] || labels[start] != 0 {
                continue;
            }
            next += 1;
            let mut stack = vec![start];
            labels[start] = next;
            while let Some(i) = stack.pop() {
                let (x, y) = (i % w, i / w);
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let j = ny as usize * w + nx as usize;
                        if mask[j] && labels[j] == 0 {
                            labels[j] = next;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        (labels, next)
    }

    #[test]
    fn components_trivial_masks() {
        let empty = vec![false; SCORE_SIZE * SCORE_SIZE];
        assert_eq!(connected_components(&empty, SCORE_SIZE, SCORE_SIZE).1, 0);

        let mut single = empty.clone();
        single[10 * SCORE_SIZE + 7] = true;
        let (labels, n) = connected_components(&single, SCORE_SIZE, SCORE_SIZE);
        assert_eq!(n, 1);
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 1);
    }

    #[test]
    fn components_diagonal_touch_is_one() {
        let mut mask = vec![false; 16];
        mask[0] = true; // (0,0)
        mask[5] = true; // (1,1)
        let (labels, n) = connected_components(&mask, 4, 4);
        assert_eq!(n, 1);
        assert_eq!(labels[0], labels[5]);
        let (oracle, on) = flood_fill_components(&mask, 4, 4);
        assert_eq!(on, 1);
        assert_eq!(oracle[0], oracle[5]);
    }

    #[test]
    fn components_match_flood_fill_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let (w, h) = (rng.random_range(1..40usize), rng.random_range(1..40usize));
            let mask: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.4)).collect();
            let (got, gn) = connected_components(&mask, w, h);
            let (want, wn) = flood_fill_components(&mask, w, h);
            assert_eq!(gn, wn);
            assert_eq!(got, want, "labels differ on {w}x{h} mask");
        }
    }

    #[test]
    fn decode_round_trip_subpixel() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = EncodeParams::default();
        for _ in 0..200 {
            let p = Point2::new(rng.random_range(4.0..60.0), rng.random_range(4.0..60.0));
            let occluded = rng.random_bool(0.5);
            let state = if occluded {
                LandmarkState::Occluded
            } else {
                LandmarkState::Visible
            };
            let d = decode(&encode(p, state, &params).unwrap()).unwrap();
            assert!(d.location.distance(&p) < 0.1, "err {} at {:?}", d.location.distance(&p), p);
            assert_eq!(d.value < 0.0, occluded);
        }
    }

    #[test]
    fn decode_value_magnitude_near_grid_points() {
        // bilinear readback attenuates with sub-pixel offset; close to grid
        // points the signed value stays near full amplitude
        let params = EncodeParams::default();
        for ox in [0.0, 0.05, 0.1] {
            for oy in [0.0, 0.05, 0.1] {
                let p = Point2::new(30.0 + ox, 27.0 + oy);
                let d = decode(&encode(p, LandmarkState::Visible, &params).unwrap()).unwrap();
                assert!(d.value > 0.95, "value {} at offset ({ox},{oy})", d.value);
                let d = decode(&encode(p, LandmarkState::Occluded, &params).unwrap()).unwrap();
                assert!(d.value < -0.95);
            }
        }
    }

    #[test]
    fn decode_suppresses_weak_distant_blob() {
        let p_strong = Point2::new(12.0, 12.0);
        let p_weak = Point2::new(50.0, 50.0);
        let strong = Heatmap::gaussian(p_strong, 1.5, 1.0);
        let weak = Heatmap::gaussian(p_weak, 1.5, 0.5);
        let mut combined = Heatmap::zero();
        for i in 0..combined.data().len() {
            combined.data_mut()[i] = strong.data()[i] + weak.data()[i];
        }
        let d = decode(&combined).unwrap();
        assert!(d.location.distance(&p_strong) < 0.1);
    }

    #[test]
    fn decode_all_zero_is_none() {
        assert!(decode(&Heatmap::zero()).is_none());
    }

    #[test]
    fn decode_scale_invariant_location() {
        let p = Point2::new(17.37, 44.81);
        let h = Heatmap::gaussian(p, 1.5, 1.0);
        let base = decode(&h).unwrap().location;
        for c in [0.25f32, 3.0, 117.0] {
            let mut scaled = h.clone();
            for v in scaled.data_mut() {
                *v *= c;
            }
            let loc = decode(&scaled).unwrap().location;
            assert!(loc.distance(&base) < 1e-6);
        }
    }

    #[test]
    fn decode_integer_position_is_exact() {
        // symmetric blob fully inside the grid: centroid equals the center
        let p = Point2::new(25.0, 33.0);
        let d = decode(&Heatmap::gaussian(p, 1.5, 1.0)).unwrap();
        assert!(d.location.distance(&p) < 1e-6);
        assert_relative_eq!(d.value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn stack_round_trip_through_original_frame() {
        // pad the fitted box so the extreme landmarks map strictly inside the grid
        let det = rect_from_landmarks(&canonical_face(Point2::new(300.0, 260.0), 200.0).points)
            .unwrap()
            .padded(0.1);
        let mut gt = canonical_face(Point2::new(300.0, 260.0), 200.0);
        gt.occ_flag[48] = true; // one occluded landmark among 67 visible
        let mut score_lms = gt.clone();
        score_lms.map_points(|p| map_point(p, CoordFrame::Original(det), CoordFrame::Score));
        let stack = encode_stack(&score_lms, &EncodeParams::default()).unwrap();

        let recovered = decode_stack(&stack, &det);
        let mut occluded_count = 0;
        for i in 0..NUM_LANDMARKS {
            assert!(recovered.detected[i]);
            let err = recovered.points[i].distance(&gt.points[i]);
            assert!(err < 1.0, "landmark {i} off by {err} px");
            if recovered.occ_score[i] < 0.0 {
                occluded_count += 1;
                assert_eq!(i, 48);
            }
        }
        assert_eq!(occluded_count, 1);
    }

    #[test]
    fn zero_stack_decodes_undetected() {
        let det = Rect::new(0.0, 0.0, 256.0, 256.0).unwrap();
        let lms = decode_stack(&HeatmapStack::zero(), &det);
        assert!(lms.detected.iter().all(|&d| !d));
    }
}
