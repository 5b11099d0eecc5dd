use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the landmark pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid rect: width {w} and height {h} must be positive and finite")]
    InvalidRect { w: f64, h: f64 },

    #[error("empty landmark set")]
    EmptyLandmarks,

    #[error("degenerate landmark extent (zero width or height)")]
    DegenerateExtent,

    #[error("expected {expected} landmarks, got {got}")]
    LandmarkCount { expected: usize, got: usize },

    #[error("point ({x}, {y}) lies outside the {size}x{size} score grid")]
    PointOutsideGrid { x: f64, y: f64, size: usize },

    #[error("heatmap stack must hold {expected} maps, got {got}")]
    StackSize { expected: usize, got: usize },

    #[error("heatmap stack is all zeros; cannot normalize")]
    ZeroStack,

    #[error("image data length {len} does not match {width}x{height}x{channels}")]
    ImageShape {
        len: usize,
        width: usize,
        height: usize,
        channels: usize,
    },

    #[error("CLAHE clip limit must be positive, got {0}")]
    BadClipLimit(f64),

    #[error("tile grid {tiles_x}x{tiles_y} does not fit a {width}x{height} image")]
    BadTileGrid {
        tiles_x: usize,
        tiles_y: usize,
        width: usize,
        height: usize,
    },

    #[error("crop box lies entirely outside the image")]
    CropOutsideImage,

    #[error("derotation requires at least one non-coincident symmetric pair")]
    DegeneratePairs,

    #[error("sampler exhausted its budget of {0} draws without an admissible window")]
    SamplerBudget(usize),

    #[error("need at least {need} valid correspondences for pose, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("model points are coplanar or degenerate")]
    CoplanarModel,

    #[error("pose iteration did not converge within {0} iterations")]
    PoseDiverged(usize),

    #[error("recovered object lies behind the camera (t_z = {0:.3})")]
    BehindCamera(f64),

    #[error("matrix is not a rotation (orthonormal, det +1) within tolerance")]
    NotARotation,

    #[error("focal length must be positive, got {0}")]
    BadFocal(f64),

    #[error("no occluded landmarks in ground truth; occlusion recall undefined")]
    NoOccludedGroundTruth,

    #[error("no ground-truth faces; precision-recall undefined")]
    NoGroundTruth,

    #[error("no matched faces; yaw statistics undefined")]
    NoMatchedFaces,

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Attach file context to a format violation.
    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
