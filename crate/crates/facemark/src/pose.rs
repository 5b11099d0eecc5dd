//! Head pose from 2D–3D point correspondences.
//!
//! Eight rigid landmarks (eye corners, nose tip, nose corners, chin) are
//! matched against a generic 3D face model and solved with the iterative
//! pose-from-orthography-and-scaling method: each round solves the scaled
//! orthographic pose from the model matrix pseudo-inverse, then updates the
//! perspective correction terms until they settle.
//!
//! Coordinate conventions (documented configuration, not an external truth):
//! the camera frame is right-handed with X to the camera's left, Y up and Z
//! forward into the scene, so a pixel projects as `u = cx - f*X/Z`,
//! `v = cy - f*Y/Z`. The model frame coincides with the camera frame when
//! the face looks straight at the camera; model names are viewer-relative.
//! Euler angles decompose intrinsically in Y–X–Z order, which makes positive
//! yaw a face turning to its own left, positive pitch looking up.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::landmarks::{LandmarkSet, RIGID};

/// Maximum POSIT iterations before giving up.
pub const MAX_ITERATIONS: usize = 100;
/// Convergence threshold on the perspective correction terms.
pub const EPSILON_TOLERANCE: f64 = 1e-6;
/// Minimum number of valid correspondences.
pub const MIN_POINTS: usize = 4;

/// Names of the eight rigid model points, in file and correspondence order.
pub const MODEL_POINT_NAMES: [&str; 8] = [
    "left_eye_outer",
    "left_eye_inner",
    "right_eye_inner",
    "right_eye_outer",
    "nose_tip",
    "left_nose_corner",
    "right_nose_corner",
    "chin",
];

/// Generic rigid 3D face model: eight named points in millimeters with the
/// origin at the nose tip. Any non-coplanar set honoring the named-point
/// geometry works; the shipped default uses anthropometric-plausible values.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceModel3D {
    points: [Vector3<f64>; 8],
}

impl Default for FaceModel3D {
    fn default() -> Self {
        // x: + toward viewer-left, y: up, z: into the head
        FaceModel3D {
            points: [
                Vector3::new(52.0, 42.0, 38.0),   // left_eye_outer
                Vector3::new(20.0, 40.0, 30.0),   // left_eye_inner
                Vector3::new(-20.0, 40.0, 30.0),  // right_eye_inner
                Vector3::new(-52.0, 42.0, 38.0),  // right_eye_outer
                Vector3::new(0.0, 0.0, 0.0),      // nose_tip
                Vector3::new(17.0, -12.0, 15.0),  // left_nose_corner
                Vector3::new(-17.0, -12.0, 15.0), // right_nose_corner
                Vector3::new(0.0, -70.0, 25.0),   // chin
            ],
        }
    }
}

impl FaceModel3D {
    pub fn new(points: [Vector3<f64>; 8]) -> Result<Self> {
        let model = FaceModel3D { points };
        model.check_noncoplanar()?;
        Ok(model)
    }

    pub fn points(&self) -> &[Vector3<f64>; 8] {
        &self.points
    }

    fn check_noncoplanar(&self) -> Result<()> {
        check_noncoplanar(&self.points)
    }

    /// Parse from CSV with header `name,x_mm,y_mm,z_mm` and the eight rows in
    /// [`MODEL_POINT_NAMES`] order.
    pub fn from_csv(path: &std::path::Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::format(path, e.to_string()))?;
        let mut points = [Vector3::zeros(); 8];
        let mut seen = 0usize;
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::format(path, e.to_string()))?;
            if i >= 8 {
                return Err(Error::format(path, "expected exactly 8 model points"));
            }
            if record.len() != 4 {
                return Err(Error::format(path, format!("row {} needs 4 fields", i + 2)));
            }
            if record[0] != *MODEL_POINT_NAMES[i] {
                return Err(Error::format(
                    path,
                    format!("row {}: expected point '{}', got '{}'", i + 2, MODEL_POINT_NAMES[i], &record[0]),
                ));
            }
            let coord = |j: usize| -> Result<f64> {
                record[j]
                    .parse::<f64>()
                    .map_err(|e| Error::format(path, format!("row {}: {}", i + 2, e)))
            };
            points[i] = Vector3::new(coord(1)?, coord(2)?, coord(3)?);
            seen += 1;
        }
        if seen != 8 {
            return Err(Error::format(path, format!("expected 8 model points, got {seen}")));
        }
        Self::new(points)
    }

    /// Serialize to the CSV model format.
    pub fn to_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        writer
            .write_record(["name", "x_mm", "y_mm", "z_mm"])
            .map_err(|e| Error::format(path, e.to_string()))?;
        for (name, p) in MODEL_POINT_NAMES.iter().zip(&self.points) {
            writer
                .write_record([name.to_string(), p.x.to_string(), p.y.to_string(), p.z.to_string()])
                .map_err(|e| Error::format(path, e.to_string()))?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn check_noncoplanar(points: &[Vector3<f64>]) -> Result<()> {
    let reference = points[0];
    let rows: Vec<Vector3<f64>> = points[1..].iter().map(|p| p - reference).collect();
    let mut m = nalgebra::DMatrix::zeros(rows.len(), 3);
    for (i, r) in rows.iter().enumerate() {
        m.set_row(i, &nalgebra::RowVector3::new(r.x, r.y, r.z).into());
    }
    let svd = m.svd(false, false);
    let s = &svd.singular_values;
    if s.len() < 3 || s[2] < 1e-8 * s[0] {
        return Err(Error::CoplanarModel);
    }
    Ok(())
}

/// Pinhole camera: focal length in pixels and the principal point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub focal: f64,
    pub principal: Point2,
}

impl CameraIntrinsics {
    pub fn new(focal: f64, principal: Point2) -> Result<Self> {
        if !(focal > 0.0) {
            return Err(Error::BadFocal(focal));
        }
        Ok(CameraIntrinsics { focal, principal })
    }

    /// Default for an image: focal = image width, principal point = center.
    pub fn for_image(width: usize, height: usize) -> Self {
        CameraIntrinsics {
            focal: width as f64,
            principal: Point2::new(width as f64 / 2.0, height as f64 / 2.0),
        }
    }
}

/// Euler angles of the head in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseAngles {
    /// Positive yaw: the face turns toward its own left.
    pub yaw: f64,
    /// Positive pitch: the face looks up.
    pub pitch: f64,
    /// In-plane tilt.
    pub roll: f64,
}

/// Rigid pose: rotation applied to model coordinates plus the translation of
/// the model origin in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Select the eight rigid landmark locations and their validity mask from a
/// 68-point set. Errors when fewer than four are usable.
pub fn select_rigid(lms: &LandmarkSet) -> Result<([Point2; 8], [bool; 8])> {
    let mut pts = [Point2::default(); 8];
    let mut mask = [false; 8];
    let mut valid = 0;
    for (slot, &idx) in RIGID.iter().enumerate() {
        pts[slot] = lms.points[idx];
        mask[slot] = lms.detected[idx];
        if mask[slot] {
            valid += 1;
        }
    }
    if valid < MIN_POINTS {
        return Err(Error::TooFewPoints {
            need: MIN_POINTS,
            got: valid,
        });
    }
    Ok((pts, mask))
}

/// Classic POSIT for non-coplanar points.
///
/// `model_pts` and `image_pts` are matched by index; at least four
/// correspondences are required and the model points must not be coplanar.
/// Returns the rotation (model to camera) and the camera-frame translation
/// of the model origin.
pub fn posit(
    model_pts: &[Vector3<f64>],
    image_pts: &[Point2],
    cam: &CameraIntrinsics,
) -> Result<Pose> {
    let n = model_pts.len();
    if n != image_pts.len() || n < MIN_POINTS {
        return Err(Error::TooFewPoints {
            need: MIN_POINTS,
            got: n.min(image_pts.len()),
        });
    }
    check_noncoplanar(model_pts)?;
    let f = cam.focal;

    // image coordinates in the camera orientation (X left, Y up)
    let x: Vec<f64> = image_pts.iter().map(|p| cam.principal.x - p.x).collect();
    let y: Vec<f64> = image_pts.iter().map(|p| cam.principal.y - p.y).collect();

    let reference = model_pts[0];
    let rows: Vec<Vector3<f64>> = model_pts[1..].iter().map(|p| p - reference).collect();
    let mut object = nalgebra::DMatrix::zeros(n - 1, 3);
    for (i, r) in rows.iter().enumerate() {
        object.set_row(i, &nalgebra::RowVector3::new(r.x, r.y, r.z).into());
    }
    let object_inv = object
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|_| Error::CoplanarModel)?;

    let mut eps = vec![0.0f64; n];
    let mut rotation = Matrix3::identity();
    let mut t_z = 0.0f64;
    let mut converged = false;

    for _ in 0..MAX_ITERATIONS {
        let xs = nalgebra::DVector::from_iterator(
            n - 1,
            (1..n).map(|i| x[i] * (1.0 + eps[i]) - x[0]),
        );
        let ys = nalgebra::DVector::from_iterator(
            n - 1,
            (1..n).map(|i| y[i] * (1.0 + eps[i]) - y[0]),
        );
        let i_vec = &object_inv * xs;
        let j_vec = &object_inv * ys;
        let i_vec = Vector3::new(i_vec[0], i_vec[1], i_vec[2]);
        let j_vec = Vector3::new(j_vec[0], j_vec[1], j_vec[2]);

        let s1 = i_vec.norm();
        let s2 = j_vec.norm();
        if s1 <= 0.0 || s2 <= 0.0 {
            return Err(Error::PoseDiverged(MAX_ITERATIONS));
        }
        let scale = (s1 * s2).sqrt();

        let i_unit = i_vec / s1;
        let j_unit = j_vec / s2;
        let k_unit = i_unit.cross(&j_unit).normalize();
        let raw = Matrix3::from_rows(&[i_unit.transpose(), j_unit.transpose(), k_unit.transpose()]);
        rotation = nearest_rotation(&raw);

        t_z = f / scale;
        let row3 = rotation.row(2).transpose();
        let mut delta = 0.0f64;
        for i in 1..n {
            let new_eps = rows[i - 1].dot(&row3) / t_z;
            delta = delta.max((new_eps - eps[i]).abs());
            eps[i] = new_eps;
        }
        if delta < EPSILON_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::PoseDiverged(MAX_ITERATIONS));
    }
    if t_z <= 0.0 {
        return Err(Error::BehindCamera(t_z));
    }

    let t_reference = Vector3::new(x[0] * t_z / f, y[0] * t_z / f, t_z);
    let translation = t_reference - rotation * reference;
    Ok(Pose {
        rotation,
        translation,
    })
}

/// Project a rotation onto the nearest proper rotation matrix via SVD.
fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

/// Compose a rotation from Euler angles, intrinsic Y–X–Z.
pub fn euler_to_rotation(angles: &PoseAngles) -> Matrix3<f64> {
    let (ya, pa, ra) = (
        angles.yaw.to_radians(),
        angles.pitch.to_radians(),
        angles.roll.to_radians(),
    );
    let (sy, cy) = ya.sin_cos();
    let (sp, cp) = pa.sin_cos();
    let (sr, cr) = ra.sin_cos();
    let r_y = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let r_x = Matrix3::new(1.0, 0.0, 0.0, 0.0, cp, -sp, 0.0, sp, cp);
    let r_z = Matrix3::new(cr, -sr, 0.0, sr, cr, 0.0, 0.0, 0.0, 1.0);
    r_y * r_x * r_z
}

/// Decompose a rotation into Euler angles (intrinsic Y–X–Z). At gimbal lock
/// (|pitch| = 90 degrees) the roll is fixed to zero. Errors when the input
/// is not orthonormal with determinant +1 within 1e-6.
pub fn rotation_to_euler(r: &Matrix3<f64>) -> Result<PoseAngles> {
    let identity_err = (r * r.transpose() - Matrix3::identity()).norm();
    if identity_err > 1e-6 || (r.determinant() - 1.0).abs() > 1e-6 {
        return Err(Error::NotARotation);
    }
    let sp = (-r[(1, 2)]).clamp(-1.0, 1.0);
    let pitch = sp.asin();
    let cp = pitch.cos();
    let (yaw, roll) = if cp.abs() < 1e-9 {
        // gimbal lock: fold everything into yaw
        let yaw = if sp > 0.0 {
            r[(0, 1)].atan2(r[(0, 0)])
        } else {
            (-r[(0, 1)]).atan2(r[(0, 0)])
        };
        (yaw, 0.0)
    } else {
        (
            r[(0, 2)].atan2(r[(2, 2)]),
            r[(1, 0)].atan2(r[(1, 1)]),
        )
    };
    Ok(PoseAngles {
        yaw: yaw.to_degrees(),
        pitch: pitch.to_degrees(),
        roll: roll.to_degrees(),
    })
}

/// End-to-end: pick the rigid landmarks out of a 68-point set, drop invalid
/// ones (and occluded ones when `exclude_occluded` is set), run POSIT and
/// convert to Euler angles.
pub fn estimate_pose(
    lms: &LandmarkSet,
    model: &FaceModel3D,
    cam: &CameraIntrinsics,
    exclude_occluded: bool,
) -> Result<(Pose, PoseAngles)> {
    let (pts, mut mask) = select_rigid(lms)?;
    if exclude_occluded {
        for (slot, &idx) in RIGID.iter().enumerate() {
            if lms.occ_flag[idx] {
                mask[slot] = false;
            }
        }
    }
    let mut model_pts = Vec::new();
    let mut image_pts = Vec::new();
    for slot in 0..8 {
        if mask[slot] {
            model_pts.push(model.points[slot]);
            image_pts.push(pts[slot]);
        }
    }
    if model_pts.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            need: MIN_POINTS,
            got: model_pts.len(),
        });
    }
    let pose = posit(&model_pts, &image_pts, cam)?;
    let angles = rotation_to_euler(&pose.rotation)?;
    Ok((pose, angles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::canonical_face;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Test-side perspective projector, written independently of posit().
    fn project(model: &FaceModel3D, r: &Matrix3<f64>, t: &Vector3<f64>, cam: &CameraIntrinsics) -> Vec<Point2> {
        model
            .points()
            .iter()
            .map(|m| {
                let p = r * m + t;
                Point2::new(
                    cam.principal.x - cam.focal * p.x / p.z,
                    cam.principal.y - cam.focal * p.y / p.z,
                )
            })
            .collect()
    }

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(800.0, Point2::new(320.0, 240.0)).unwrap()
    }

    #[test]
    fn euler_identity() {
        let a = rotation_to_euler(&Matrix3::identity()).unwrap();
        assert_relative_eq!(a.yaw, 0.0, epsilon = 1e-12);
        assert_relative_eq!(a.pitch, 0.0, epsilon = 1e-12);
        assert_relative_eq!(a.roll, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn euler_pure_yaw() {
        let r = euler_to_rotation(&PoseAngles { yaw: 45.0, pitch: 0.0, roll: 0.0 });
        let a = rotation_to_euler(&r).unwrap();
        assert_relative_eq!(a.yaw, 45.0, epsilon = 1e-9);
        assert_relative_eq!(a.pitch, 0.0, epsilon = 1e-9);
        assert_relative_eq!(a.roll, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn euler_composition_round_trip() {
        let truth = PoseAngles { yaw: 20.0, pitch: 10.0, roll: 5.0 };
        let a = rotation_to_euler(&euler_to_rotation(&truth)).unwrap();
        assert_relative_eq!(a.yaw, truth.yaw, epsilon = 1e-9);
        assert_relative_eq!(a.pitch, truth.pitch, epsilon = 1e-9);
        assert_relative_eq!(a.roll, truth.roll, epsilon = 1e-9);
    }

    #[test]
    fn euler_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let truth = PoseAngles {
                yaw: rng.random_range(-170.0..170.0),
                pitch: rng.random_range(-85.0..85.0),
                roll: rng.random_range(-170.0..170.0),
            };
            let a = rotation_to_euler(&euler_to_rotation(&truth)).unwrap();
            assert_relative_eq!(a.yaw, truth.yaw, epsilon = 1e-9);
            assert_relative_eq!(a.pitch, truth.pitch, epsilon = 1e-9);
            assert_relative_eq!(a.roll, truth.roll, epsilon = 1e-9);
        }
    }

    #[test]
    fn euler_rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.2, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(rotation_to_euler(&m), Err(Error::NotARotation)));
    }

    #[test]
    fn positive_yaw_turns_face_left() {
        // nose direction is -Z in model coordinates; for the person facing
        // the camera their left is the camera's right (-X)
        let r = euler_to_rotation(&PoseAngles { yaw: 30.0, pitch: 0.0, roll: 0.0 });
        let nose_dir = r * Vector3::new(0.0, 0.0, -1.0);
        assert!(nose_dir.x < 0.0, "nose should swing toward camera-right (-X)");
    }

    #[test]
    fn posit_identity_pose() {
        let model = FaceModel3D::default();
        let t = Vector3::new(0.0, 0.0, 1000.0);
        let img = project(&model, &Matrix3::identity(), &t, &cam());
        let pose = posit(model.points(), &img, &cam()).unwrap();
        assert!((pose.rotation - Matrix3::identity()).norm() < 1e-4);
        assert!((pose.translation.z - 1000.0).abs() / 1000.0 < 1e-3);
    }

    #[test]
    fn posit_recovers_composed_pose() {
        let model = FaceModel3D::default();
        let truth = PoseAngles { yaw: 30.0, pitch: 10.0, roll: 0.0 };
        let r = euler_to_rotation(&truth);
        let t = Vector3::new(50.0, -30.0, 900.0);
        let img = project(&model, &r, &t, &cam());
        let pose = posit(model.points(), &img, &cam()).unwrap();
        let a = rotation_to_euler(&pose.rotation).unwrap();
        assert!((a.yaw - truth.yaw).abs() < 0.5);
        assert!((a.pitch - truth.pitch).abs() < 0.5);
        assert!((a.roll - truth.roll).abs() < 0.5);
    }

    #[test]
    fn posit_orthographic_limit_converges_immediately() {
        // at very large distance the epsilon terms vanish and one round is enough
        let model = FaceModel3D::default();
        let t = Vector3::new(0.0, 0.0, 1.0e7);
        let img = project(&model, &Matrix3::identity(), &t, &cam());
        let pose = posit(model.points(), &img, &cam()).unwrap();
        assert!((pose.rotation - Matrix3::identity()).norm() < 1e-3);
    }

    #[test]
    fn posit_rejects_coplanar_model() {
        let flat: Vec<Vector3<f64>> = (0..6)
            .map(|i| Vector3::new(i as f64 * 10.0, (i % 3) as f64 * 7.0, 0.0))
            .collect();
        let img: Vec<Point2> = (0..6).map(|i| Point2::new(i as f64, i as f64)).collect();
        assert!(matches!(
            posit(&flat, &img, &cam()),
            Err(Error::CoplanarModel)
        ));
    }

    #[test]
    fn posit_needs_four_points() {
        let model = FaceModel3D::default();
        let img = vec![Point2::new(0.0, 0.0); 3];
        assert!(matches!(
            posit(&model.points()[..3], &img, &cam()),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn select_rigid_full_and_masked() {
        let lms = canonical_face(Point2::new(128.0, 128.0), 100.0);
        let (pts, mask) = select_rigid(&lms).unwrap();
        assert!(mask.iter().all(|&m| m));
        // chin is visually the lowest point (largest image y) of an upright face
        let chin = pts[7];
        let max_y = lms.points.iter().map(|p| p.y).fold(f64::MIN, f64::max);
        assert_relative_eq!(chin.y, max_y, epsilon = 1e-9);

        let mut masked = lms.clone();
        for &i in &crate::landmarks::LEFT_EYE {
            masked.detected[i] = false;
        }
        for &i in &crate::landmarks::RIGHT_EYE {
            masked.detected[i] = false;
        }
        let (_, mask) = select_rigid(&masked).unwrap();
        assert_eq!(mask.iter().filter(|&&m| !m).count(), 4);

        for i in 0..30 {
            masked.detected[i] = false;
        }
        for i in 30..36 {
            masked.detected[i] = false;
        }
        assert!(matches!(select_rigid(&masked), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn model_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.csv");
        let model = FaceModel3D::default();
        model.to_csv(&path).unwrap();
        let back = FaceModel3D::from_csv(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn model_csv_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "name,x_mm,y_mm,z_mm\nnose_tip,0,0,0\n").unwrap();
        assert!(FaceModel3D::from_csv(&path).is_err());
    }
}
