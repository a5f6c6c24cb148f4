use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("kernel evaluated at a singular point (|x| = {0:e})")]
    SingularPoint(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "centerline is a straight line (max curvature {max_curvature:e} <= {threshold:e}); \
         the resistance matrix degenerates"
    )]
    StraightCurve { max_curvature: f64, threshold: f64 },

    #[error("resistance matrix is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("index {index} out of range {lo}..={hi}")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },

    #[error("collision at t = {time} (minimum distance {distance:e})")]
    Collision { time: f64, distance: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
