use thiserror::Error;

/// Errors raised by the inspection library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate optics: {0}")]
    DegenerateOptics(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("chord {chord} mm exceeds bore diameter {diameter} mm")]
    ChordExceedsDiameter { chord: f64, diameter: f64 },

    #[error("coordinate {value} outside the visible arc (limit {limit})")]
    OutOfDomain { value: f64, limit: f64 },

    #[error("sample ({x}, {y}) outside {width}x{height} image")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("degenerate scan plan: {0}")]
    DegeneratePlan(String),

    #[error("defect placement: {0}")]
    Placement(String),

    #[error("blobs come from different frames ({a:?} vs {b:?})")]
    FrameMismatch {
        a: crate::unwrap::TileIndex,
        b: crate::unwrap::TileIndex,
    },

    #[error("no line-like component found")]
    LineNotFound,

    #[error("histogram has a single level; otsu threshold undefined")]
    DegenerateThreshold,

    #[error("tile index (j={j}, k={k}) not in plan")]
    Index { j: usize, k: usize },

    #[error("image format: {0}")]
    Format(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("image {path}: {reason}")]
    Image { path: String, reason: String },

    #[error("no truth defects available")]
    NoTruth,

    #[error("no trials to compare")]
    NoTrials,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
