use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image dimensions {width}x{height} are not divisible by stride {stride}")]
    Dimension { width: u32, height: u32, stride: u32 },

    #[error("bad magic bytes, expected WFHM")]
    MagicMismatch,

    #[error("header dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("truncated tensor file: expected {expected} bytes, found {actual}")]
    TruncatedFile { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-positive depth at masked cell {0}")]
    NonPositiveDepth(usize),

    #[error("line endpoints coincide")]
    DegenerateLine,

    #[error("vanishing points are degenerate: {0}")]
    DegenerateVps(String),

    #[error("vanishing points imply negative focal squared ({0})")]
    NegativeFocalSquared(f64),

    #[error("no edge is visible from the camera")]
    EmptyView,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no acceptable scene after {0} attempts")]
    GenerationExhausted(usize),

    #[error("vertex {0} has no initial depth")]
    MissingDepth(usize),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("no predicted junction matched a ground-truth junction")]
    EmptyMatch,

    #[error("invalid wireframe: {0}")]
    InvalidWireframe(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
