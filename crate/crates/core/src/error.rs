use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {left} points vs {right} points")]
    DimensionMismatch { left: usize, right: usize },

    #[error("point {point} out of range for a space of {len} points")]
    PointOutOfRange { point: usize, len: usize },

    #[error("space would have {requested} points, above the cap of {cap}")]
    TooLarge { requested: usize, cap: usize },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("empty set at point {point}, level {level}")]
    EmptySet { point: usize, level: usize },

    #[error("row {row} has no mass inside radius {radius}")]
    NoMassInside { row: usize, radius: u32 },

    #[error("core region is empty (margin {margin})")]
    EmptyCore { margin: u32 },

    #[error("no distinct core pairs at distance < {window}")]
    EmptyPairSet { window: u32 },

    #[error(
        "witness selection exhausted at i = {index}: no level with support radius > {min_radius} \
         has variation < {tolerance} at window K = {window} (best available {best})"
    )]
    SelectionExhausted {
        index: usize,
        window: u64,
        tolerance: f64,
        min_radius: u32,
        best: f64,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
