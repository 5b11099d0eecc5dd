//! Occlusion-aware facial landmark pipeline.
//!
//! Everything downstream of the landmark network lives here. A detector
//! proposes face boxes; a predictor (real or synthetic) turns each crop into
//! 68 signed 64x64 score images where blob magnitude localizes a landmark
//! and the sign says whether it is occluded. This crate implements:
//!
//! * [`geometry`] — boxes, IOU and the score/input/original frame chain;
//! * [`imaging`] — image container, CLAHE on the YCrCb luma, rotation,
//!   crop-resize and horizontal flip with landmark remapping;
//! * [`heatmap`] — the signed Gaussian codec: encode labels, decode
//!   locations and occlusion values back out of score images;
//! * [`scoring`] — landmark/face scores, NMS grouping, score-image fusion
//!   and the final per-face refinement;
//! * [`pose`] — head pose from eight rigid landmarks against a generic 3D
//!   face model, with Euler-angle extraction;
//! * [`augment`] — training-window sampling, roll derotation, synthetic
//!   occluder compositing and the noisy synthetic predictor;
//! * [`eval`] — detection/occlusion precision-recall, yaw statistics and
//!   eye/mouth openness features;
//! * [`formats`] — the binary heatmap container, 300-W `.pts` files,
//!   JSON-lines detection records and PNG I/O.

pub mod augment;
pub mod error;
pub mod eval;
pub mod formats;
pub mod geometry;
pub mod heatmap;
pub mod imaging;
pub mod landmarks;
pub mod pose;
pub mod scoring;

pub use error::{Error, Result};
pub use geometry::{iou, map_point, rect_from_landmarks, CoordFrame, Point2, Rect};
pub use heatmap::{decode, decode_stack, encode, encode_stack, EncodeParams, Heatmap, HeatmapStack};
pub use landmarks::{LandmarkSet, NUM_LANDMARKS};
pub use scoring::{nms_group, refine, Detection, DetectionGroup, RefinedFace};
