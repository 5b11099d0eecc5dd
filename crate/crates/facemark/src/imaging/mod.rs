//! 8-bit image container and the preprocessing primitives: rotation,
//! crop-resize and horizontal flip, all with exact landmark transforms.
//! Contrast-limited adaptive histogram equalization lives in [`clahe`].
//!
//! Resampling follows the global pixel-center convention: pixel `(x, y)`
//! is sampled at `(x + 0.5, y + 0.5)`.

mod clahe;

pub use clahe::{clahe, rgb_to_ycrcb, ycrcb_to_rgb, DEFAULT_CLIP_LIMIT, DEFAULT_TILES};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Rect};
use crate::landmarks::LandmarkSet;

/// Row-major 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * channels || !(channels == 1 || channels == 3) {
            return Err(Error::ImageShape {
                len: data.len(),
                width,
                height,
                channels,
            });
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Bilinear sample of channel `c` at a continuous coordinate. Positions
    /// inside the image clamp their neighbor cells to the border (so border
    /// samples replicate edge pixels); positions outside return zero.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> f64 {
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return 0.0;
        }
        let gx = x - 0.5;
        let gy = y - 0.5;
        let x0 = gx.floor();
        let y0 = gy.floor();
        let fx = gx - x0;
        let fy = gy - y0;
        let cl = |v: f64, hi: usize| (v.max(0.0) as usize).min(hi - 1);
        let (x0c, x1c) = (cl(x0, self.width), cl(x0 + 1.0, self.width));
        let (y0c, y1c) = (cl(y0, self.height), cl(y0 + 1.0, self.height));
        let v00 = self.get(x0c, y0c, c) as f64;
        let v10 = self.get(x1c, y0c, c) as f64;
        let v01 = self.get(x0c, y1c, c) as f64;
        let v11 = self.get(x1c, y1c, c) as f64;
        v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy
    }
}

/// Rotate image and landmarks by `angle_deg` about `center`. Positive angles
/// rotate from +x toward +y (clockwise on screen with y pointing down).
/// Pixels are bilinearly resampled with zero fill; points transform by the
/// exact rotation matrix.
pub fn rotate(img: &Image, angle_deg: f64, center: Point2, points: &LandmarkSet) -> (Image, LandmarkSet) {
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let mut out = Image::filled(img.width, img.height, img.channels, 0).expect("same shape");
    for y in 0..img.height {
        for x in 0..img.width {
            // inverse-map the output pixel center into the source
            let dx = (x as f64 + 0.5) - center.x;
            let dy = (y as f64 + 0.5) - center.y;
            let sx = center.x + cos * dx + sin * dy;
            let sy = center.y - sin * dx + cos * dy;
            for c in 0..img.channels {
                let v = img.sample_bilinear(sx, sy, c);
                out.set(x, y, c, v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let mut lms = points.clone();
    lms.map_points(|p| {
        let dx = p.x - center.x;
        let dy = p.y - center.y;
        Point2::new(center.x + cos * dx - sin * dy, center.y + sin * dx + cos * dy)
    });
    (out, lms)
}

/// Transform a single point by the same rotation `rotate` applies.
pub fn rotate_point(p: Point2, angle_deg: f64, center: Point2) -> Point2 {
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let dx = p.x - center.x;
    let dy = p.y - center.y;
    Point2::new(center.x + cos * dx - sin * dy, center.y + sin * dx + cos * dy)
}

/// Crop `rect` out of the image and resize to `out_size` x `out_size` with
/// bilinear sampling. The box may extend beyond the image; uncovered regions
/// come out zero. Errors if the box misses the image entirely.
pub fn crop_resize(img: &Image, rect: &Rect, out_size: usize) -> Result<Image> {
    if rect.right() <= 0.0
        || rect.bottom() <= 0.0
        || rect.x >= img.width as f64
        || rect.y >= img.height as f64
    {
        return Err(Error::CropOutsideImage);
    }
    let mut out = Image::filled(out_size, out_size, img.channels, 0)?;
    let sx_scale = rect.w / out_size as f64;
    let sy_scale = rect.h / out_size as f64;
    for y in 0..out_size {
        let sy = rect.y + (y as f64 + 0.5) * sy_scale;
        for x in 0..out_size {
            let sx = rect.x + (x as f64 + 0.5) * sx_scale;
            for c in 0..img.channels {
                let v = img.sample_bilinear(sx, sy, c);
                out.set(x, y, c, v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(out)
}

/// Mirror the image about its vertical axis and remap the landmark set by
/// the standard 68-point mirror correspondence (x -> width - x).
pub fn flip_horizontal(img: &Image, points: &LandmarkSet) -> (Image, LandmarkSet) {
    let mut out = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            for c in 0..img.channels {
                out.set(x, y, c, img.get(img.width - 1 - x, y, c));
            }
        }
    }
    (out, points.mirrored(img.width as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::canonical_face;

    fn test_pattern(w: usize, h: usize) -> Image {
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(((x * 7 + y * 13) % 256) as u8);
            }
        }
        Image::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn rotate_zero_is_identity() {
        let img = test_pattern(32, 24);
        let lms = canonical_face(Point2::new(16.0, 12.0), 10.0);
        let (rot, out) = rotate(&img, 0.0, Point2::new(16.0, 12.0), &lms);
        assert_eq!(rot, img);
        assert_eq!(out, lms);
    }

    #[test]
    fn rotate_fixes_center_point() {
        let mut lms = canonical_face(Point2::new(16.0, 16.0), 10.0);
        lms.points[0] = Point2::new(16.0, 16.0);
        let img = test_pattern(32, 32);
        let (_, out) = rotate(&img, 90.0, Point2::new(16.0, 16.0), &lms);
        assert!(out.points[0].distance(&Point2::new(16.0, 16.0)) < 1e-12);
    }

    #[test]
    fn rotate_half_turn_mirrors_offset() {
        let c = Point2::new(20.0, 15.0);
        let p = rotate_point(Point2::new(c.x + 4.0, c.y), 180.0, c);
        assert!((p.x - (c.x - 4.0)).abs() < 1e-9);
        assert!((p.y - c.y).abs() < 1e-9);
    }

    #[test]
    fn rotate_points_invert_exactly() {
        let img = test_pattern(16, 16);
        let lms = canonical_face(Point2::new(8.0, 8.0), 8.0);
        let c = Point2::new(5.0, 11.0);
        let (img2, fwd) = rotate(&img, 33.7, c, &lms);
        let (_, back) = rotate(&img2, -33.7, c, &fwd);
        for (a, b) in back.points.iter().zip(&lms.points) {
            assert!(a.distance(b) < 1e-9);
        }
    }

    #[test]
    fn crop_full_image_is_identity() {
        let img = test_pattern(20, 20);
        let rect = Rect::new(0.0, 0.0, 20.0, 20.0).unwrap();
        let out = crop_resize(&img, &rect, 20).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn crop_half_outside_pads_zero() {
        let img = Image::filled(10, 10, 1, 200).unwrap();
        let rect = Rect::new(-10.0, 0.0, 20.0, 10.0).unwrap();
        let out = crop_resize(&img, &rect, 20).unwrap();
        // left half maps to x < 0 in the source
        for y in 0..20 {
            for x in 0..9 {
                assert_eq!(out.get(x, y, 0), 0, "({x},{y})");
            }
            for x in 11..20 {
                assert_eq!(out.get(x, y, 0), 200, "({x},{y})");
            }
        }
    }

    #[test]
    fn crop_fully_outside_errors() {
        let img = test_pattern(10, 10);
        let rect = Rect::new(100.0, 100.0, 5.0, 5.0).unwrap();
        assert!(matches!(crop_resize(&img, &rect, 8), Err(Error::CropOutsideImage)));
    }

    #[test]
    fn checkerboard_upsample_preserves_corner_samples() {
        let img = Image::new(2, 2, 1, vec![255, 0, 0, 255]).unwrap();
        let rect = Rect::new(0.0, 0.0, 2.0, 2.0).unwrap();
        let out = crop_resize(&img, &rect, 4).unwrap();
        // output corners sample at source (0.25, 0.25) etc., which clamp to
        // the nearest source pixel under the center convention
        assert_eq!(out.get(0, 0, 0), 255);
        assert_eq!(out.get(3, 0, 0), 0);
        assert_eq!(out.get(0, 3, 0), 0);
        assert_eq!(out.get(3, 3, 0), 255);
    }

    #[test]
    fn flip_twice_is_identity() {
        let img = test_pattern(17, 11);
        let mut lms = canonical_face(Point2::new(8.0, 5.0), 6.0);
        lms.occ_flag[36] = true;
        let (f1, l1) = flip_horizontal(&img, &lms);
        let (f2, l2) = flip_horizontal(&f1, &l1);
        assert_eq!(f2, img);
        for i in 0..lms.len() {
            assert!(l2.points[i].distance(&lms.points[i]) < 1e-12);
        }
        assert_eq!(l2.occ_flag, lms.occ_flag);
    }

    #[test]
    fn flip_symmetric_face_fixes_landmarks() {
        let img = Image::filled(100, 100, 1, 128).unwrap();
        let lms = canonical_face(Point2::new(50.0, 50.0), 60.0);
        let (_, flipped) = flip_horizontal(&img, &lms);
        for i in 0..lms.len() {
            assert!(flipped.points[i].distance(&lms.points[i]) < 1e-9, "landmark {i}");
        }
    }

    #[test]
    fn flip_keeps_nose_bridge_indices() {
        let img = Image::filled(64, 64, 1, 0).unwrap();
        let mut lms = canonical_face(Point2::new(30.0, 30.0), 20.0);
        // move the bridge off the symmetry axis so the mirror is visible
        for i in 27..31 {
            lms.points[i].x += 3.0;
        }
        let (_, flipped) = flip_horizontal(&img, &lms);
        for i in 27..31 {
            assert!((flipped.points[i].x - (64.0 - lms.points[i].x)).abs() < 1e-9);
            assert!((flipped.points[i].y - lms.points[i].y).abs() < 1e-9);
        }
    }
}
