//! Boxes, points and the coordinate frames of the pipeline.
//!
//! All coordinates are continuous: pixel `i` spans `[i, i + 1)` and has its
//! center at `i + 0.5`. Boxes are stored as floats so repeated refinement
//! does not accumulate rounding.
//!
//! Three frames chain together:
//!
//! * **score** — the 64x64 grid a heatmap lives in,
//! * **input** — the 256x256 network input crop (score x 4),
//! * **original** — full-image coordinates, reached through a detection box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side of the score grid in pixels.
pub const SCORE_SIZE: usize = 64;
/// Side of the network input crop in pixels.
pub const INPUT_SIZE: usize = 256;
/// Fixed scale between score and input frames.
pub const SCORE_TO_INPUT: f64 = (INPUT_SIZE / SCORE_SIZE) as f64;
/// Fraction of the tight landmark box height added above the brows.
pub const TOP_EXTEND: f64 = 0.2;

/// A 2-D point in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned box: `(x, y)` is the top-left corner, `w`/`h` strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidRect { w, h });
        }
        Ok(Rect { x, y, w, h })
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.x && p.x < self.right() && p.y >= self.y && p.y < self.bottom()
    }

    /// Move the top edge up by `ratio` of the current height, keeping the bottom fixed.
    pub fn extend_top(&self, ratio: f64) -> Rect {
        Rect {
            x: self.x,
            y: self.y - ratio * self.h,
            w: self.w,
            h: self.h * (1.0 + ratio),
        }
    }

    /// Grow the box about its center by `frac` of each dimension per side.
    pub fn padded(&self, frac: f64) -> Rect {
        Rect {
            x: self.x - frac * self.w,
            y: self.y - frac * self.h,
            w: self.w * (1.0 + 2.0 * frac),
            h: self.h * (1.0 + 2.0 * frac),
        }
    }
}

/// Intersection-over-union of two boxes. Symmetric, in `[0, 1]`, zero when disjoint.
pub fn iou(a: &Rect, b: &Rect) -> f64 {
    let ix = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let iy = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    inter / union
}

/// Tight bounding box of a point set. Errors on empty input or zero extent.
pub fn tight_rect(points: &[Point2]) -> Result<Rect> {
    if points.is_empty() {
        return Err(Error::EmptyLandmarks);
    }
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for p in points {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    let (w, h) = (max_x - min_x, max_y - min_y);
    if w <= 0.0 || h <= 0.0 {
        return Err(Error::DegenerateExtent);
    }
    Rect::new(min_x, min_y, w, h)
}

/// Face box derived from landmarks: tight box with the top edge raised by 20%
/// of the tight height, so the forehead is included like annotated face boxes.
pub fn rect_from_landmarks(points: &[Point2]) -> Result<Rect> {
    Ok(tight_rect(points)?.extend_top(TOP_EXTEND))
}

/// One of the three coordinate frames. `Original` carries the detection box
/// that situates the 256x256 input crop inside the full image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordFrame {
    Score,
    Input,
    Original(Rect),
}

impl CoordFrame {
    fn to_input(&self, p: Point2) -> Point2 {
        match self {
            CoordFrame::Score => Point2::new(p.x * SCORE_TO_INPUT, p.y * SCORE_TO_INPUT),
            CoordFrame::Input => p,
            CoordFrame::Original(b) => Point2::new(
                (p.x - b.x) * INPUT_SIZE as f64 / b.w,
                (p.y - b.y) * INPUT_SIZE as f64 / b.h,
            ),
        }
    }

    fn from_input(&self, p: Point2) -> Point2 {
        match self {
            CoordFrame::Score => Point2::new(p.x / SCORE_TO_INPUT, p.y / SCORE_TO_INPUT),
            CoordFrame::Input => p,
            CoordFrame::Original(b) => Point2::new(
                p.x * b.w / INPUT_SIZE as f64 + b.x,
                p.y * b.h / INPUT_SIZE as f64 + b.y,
            ),
        }
    }
}

/// Map a point between frames with center-preserving scaling: coordinate `c`
/// in a frame of width `W` goes to `c * W' / W`, plus the detection-box
/// translation when an original frame is involved.
pub fn map_point(p: Point2, from: CoordFrame, to: CoordFrame) -> Point2 {
    to.from_input(from.to_input(p))
}
