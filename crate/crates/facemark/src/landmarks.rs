//! The 68-point landmark scheme (Multi-PIE / 300-W ordering) and the
//! per-face landmark container used throughout the pipeline.
//!
//! Index groups, 0-based:
//!
//! * 0–16 jaw (viewer-left ear to viewer-right ear)
//! * 17–21 viewer-left brow, 22–26 viewer-right brow
//! * 27–30 nose bridge (30 = nose tip), 31–35 nostril row
//! * 36–41 viewer-left eye, 42–47 viewer-right eye
//! * 48–59 outer mouth, 60–67 inner mouth
//!
//! "Left"/"right" are image-relative (as seen by the viewer) throughout.

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Number of landmarks in the scheme.
pub const NUM_LANDMARKS: usize = 68;

/// Jaw indices.
pub const JAW: std::ops::RangeInclusive<usize> = 0..=16;
/// Viewer-left eye indices (outer corner first).
pub const LEFT_EYE: [usize; 6] = [36, 37, 38, 39, 40, 41];
/// Viewer-right eye indices (inner corner first).
pub const RIGHT_EYE: [usize; 6] = [42, 43, 44, 45, 46, 47];
/// Inner-mouth indices.
pub const INNER_MOUTH: [usize; 8] = [60, 61, 62, 63, 64, 65, 66, 67];
/// The six non-corner inner-mouth indices, in polygon order.
pub const INNER_MOUTH_POLY: [usize; 6] = [61, 62, 63, 65, 66, 67];
/// All mouth indices (outer + inner), used for the mouth-occlusion vote.
pub const MOUTH: std::ops::RangeInclusive<usize> = 48..=67;

/// The eight rigid landmarks used for pose, in model-file order:
/// left-eye outer/inner, right-eye inner/outer, nose tip,
/// left/right nose corner, chin.
pub const RIGID: [usize; 8] = [36, 39, 42, 45, 30, 31, 35, 8];

/// Left/right symmetric pairs used by roll derotation: brow outer, brow inner,
/// eye outer, eye inner, nose corners, mouth corners.
pub const SYMMETRIC_PAIRS: [(usize, usize); 6] =
    [(17, 26), (21, 22), (36, 45), (39, 42), (31, 35), (48, 54)];

/// Index correspondence under a horizontal mirror. `MIRROR[i]` is the landmark
/// that takes index `i` after flipping. Involutive; midline points map to
/// themselves. Validated by the symmetric-face property test rather than
/// trusted as transcribed.
pub const MIRROR: [usize; NUM_LANDMARKS] = [
    // jaw
    16, 15, 14, 13, 12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0,
    // brows
    26, 25, 24, 23, 22, 21, 20, 19, 18, 17,
    // nose bridge
    27, 28, 29, 30,
    // nostril row
    35, 34, 33, 32, 31,
    // eyes
    45, 44, 43, 42, 47, 46, 39, 38, 37, 36, 41, 40,
    // outer mouth
    54, 53, 52, 51, 50, 49, 48, 59, 58, 57, 56, 55,
    // inner mouth
    64, 63, 62, 61, 60, 67, 66, 65,
];

/// A full 68-landmark annotation or prediction: locations plus per-landmark
/// occlusion score, occlusion flag, optional Gaussian-fit score, and whether
/// the landmark was detected at all. All vectors have length 68.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub points: Vec<Point2>,
    pub occ_score: Vec<f64>,
    pub occ_flag: Vec<bool>,
    pub lm_score: Vec<Option<f64>>,
    pub detected: Vec<bool>,
}

impl LandmarkSet {
    /// All landmarks visible and detected, zero occlusion scores.
    pub fn from_points(points: Vec<Point2>) -> Result<Self> {
        if points.len() != NUM_LANDMARKS {
            return Err(Error::LandmarkCount {
                expected: NUM_LANDMARKS,
                got: points.len(),
            });
        }
        Ok(LandmarkSet {
            points,
            occ_score: vec![0.0; NUM_LANDMARKS],
            occ_flag: vec![false; NUM_LANDMARKS],
            lm_score: vec![None; NUM_LANDMARKS],
            detected: vec![true; NUM_LANDMARKS],
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points of landmarks that were actually detected.
    pub fn detected_points(&self) -> Vec<Point2> {
        self.points
            .iter()
            .zip(&self.detected)
            .filter(|(_, &d)| d)
            .map(|(p, _)| *p)
            .collect()
    }

    /// Apply `f` to every point in place.
    pub fn map_points(&mut self, mut f: impl FnMut(Point2) -> Point2) {
        for p in &mut self.points {
            *p = f(*p);
        }
    }

    /// Reindex by the mirror table and map x through `x -> width - x`.
    /// Scores and flags travel with their landmarks.
    pub fn mirrored(&self, width: f64) -> LandmarkSet {
        let mut out = self.clone();
        for i in 0..NUM_LANDMARKS {
            let j = MIRROR[i];
            out.points[i] = Point2::new(width - self.points[j].x, self.points[j].y);
            out.occ_score[i] = self.occ_score[j];
            out.occ_flag[i] = self.occ_flag[j];
            out.lm_score[i] = self.lm_score[j];
            out.detected[i] = self.detected[j];
        }
        out
    }
}

/// A canonical, perfectly left-right symmetric face layout. `center` is the
/// face midpoint and `size` the overall face diameter. Useful as ground truth
/// for synthetic data.
pub fn canonical_face(center: Point2, size: f64) -> LandmarkSet {
    let s = size / 2.0;
    let mut pts = vec![Point2::default(); NUM_LANDMARKS];
    let mut put = |i: usize, x: f64, y: f64| {
        pts[i] = Point2::new(center.x + x * s, center.y + y * s);
    };

    // jaw: ellipse arc from viewer-left ear over the chin to viewer-right ear
    for i in 0..17 {
        let phi = std::f64::consts::PI * i as f64 / 16.0;
        put(i, -0.9 * phi.cos(), -0.05 + 1.0 * phi.sin());
    }
    // brows
    for k in 0..5 {
        let arc = 0.08 * (std::f64::consts::PI * k as f64 / 4.0).sin();
        put(17 + k, -0.7 + 0.125 * k as f64, -0.55 - arc);
        put(26 - k, 0.7 - 0.125 * k as f64, -0.55 - arc);
    }
    // nose bridge and tip
    put(27, 0.0, -0.45);
    put(28, 0.0, -0.28);
    put(29, 0.0, -0.11);
    put(30, 0.0, 0.08);
    // nostril row
    put(31, -0.16, 0.22);
    put(32, -0.08, 0.225);
    put(33, 0.0, 0.23);
    put(34, 0.08, 0.225);
    put(35, 0.16, 0.22);
    // eyes
    let eye = [
        (-0.15, 0.0),
        (-0.07, -0.05),
        (0.07, -0.05),
        (0.15, 0.0),
        (0.07, 0.05),
        (-0.07, 0.05),
    ];
    for (k, &(dx, dy)) in eye.iter().enumerate() {
        put(36 + k, -0.4 + dx, -0.35 + dy);
        put(42 + k, 0.4 + dx, -0.35 + dy);
    }
    // outer mouth
    let outer = [
        (-0.28, 0.0),
        (-0.17, -0.07),
        (-0.07, -0.10),
        (0.0, -0.09),
        (0.07, -0.10),
        (0.17, -0.07),
        (0.28, 0.0),
        (0.17, 0.07),
        (0.07, 0.11),
        (0.0, 0.12),
        (-0.07, 0.11),
        (-0.17, 0.07),
    ];
    for (k, &(dx, dy)) in outer.iter().enumerate() {
        put(48 + k, dx, 0.55 + dy);
    }
    // inner mouth
    let inner = [
        (-0.20, 0.0),
        (-0.09, -0.03),
        (0.0, -0.04),
        (0.09, -0.03),
        (0.20, 0.0),
        (0.09, 0.04),
        (0.0, 0.05),
        (-0.09, 0.04),
    ];
    for (k, &(dx, dy)) in inner.iter().enumerate() {
        put(60 + k, dx, 0.55 + dy);
    }

    LandmarkSet::from_points(pts).expect("canonical layout has 68 points")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_is_involutive() {
        for i in 0..NUM_LANDMARKS {
            assert_eq!(MIRROR[MIRROR[i]], i, "index {i}");
        }
    }

    #[test]
    fn mirror_fixes_midline() {
        for i in [8, 27, 28, 29, 30, 33, 51, 57, 62, 66] {
            assert_eq!(MIRROR[i], i);
        }
    }

    #[test]
    fn canonical_face_is_symmetric() {
        let c = Point2::new(100.0, 100.0);
        let lms = canonical_face(c, 80.0);
        for i in 0..NUM_LANDMARKS {
            let j = MIRROR[i];
            let (a, b) = (lms.points[i], lms.points[j]);
            assert!(
                (a.x - c.x + (b.x - c.x)).abs() < 1e-9,
                "x mirror broken at {i}<->{j}"
            );
            assert!((a.y - b.y).abs() < 1e-9, "y mismatch at {i}<->{j}");
        }
    }

    #[test]
    fn mirrored_symmetric_face_is_identity() {
        let width = 200.0;
        let lms = canonical_face(Point2::new(width / 2.0, 90.0), 100.0);
        let flipped = lms.mirrored(width);
        for i in 0..NUM_LANDMARKS {
            assert!(flipped.points[i].distance(&lms.points[i]) < 1e-9, "landmark {i}");
        }
    }

    #[test]
    fn mirrored_twice_is_identity_with_flags() {
        let mut lms = canonical_face(Point2::new(60.0, 70.0), 60.0);
        lms.occ_flag[40] = true;
        lms.occ_score[40] = -0.7;
        lms.detected[3] = false;
        let back = lms.mirrored(128.0).mirrored(128.0);
        for i in 0..NUM_LANDMARKS {
            // x -> w - (w - x) can lose an ulp
            assert!(back.points[i].distance(&lms.points[i]) < 1e-12);
        }
        assert_eq!(back.occ_flag, lms.occ_flag);
        assert_eq!(back.occ_score, lms.occ_score);
        assert_eq!(back.detected, lms.detected);
    }

    #[test]
    fn rigid_count_and_order() {
        assert_eq!(RIGID.len(), 8);
        // nose tip sits in the middle of the list, chin last
        assert_eq!(RIGID[4], 30);
        assert_eq!(RIGID[7], 8);
    }

    #[test]
    fn wrong_count_rejected() {
        assert!(matches!(
            LandmarkSet::from_points(vec![Point2::default(); 29]),
            Err(Error::LandmarkCount { expected: 68, got: 29 })
        ));
    }
}
