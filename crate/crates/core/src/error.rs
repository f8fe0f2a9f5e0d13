use std::path::PathBuf;

/// Errors produced by the registration and tracking toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no correspondences passed the descriptor threshold")]
    NoCorrespondences,

    #[error("too few correspondences: {found} (need at least {required})")]
    TooFewCorrespondences { found: usize, required: usize },

    #[error("registration failed: {0}")]
    RegistrationFailed(String),

    #[error("no correspondences within {max_distance} mm")]
    NoCorrespondencesInRange { max_distance: f64 },

    #[error("ICP energy became non-finite")]
    NonFiniteEnergy,

    #[error("crop box contains no scene points")]
    EmptyCrop,

    #[error("no scene points within the neighborhood of the reference points")]
    EmptyNeighborhood,

    #[error("too few ground-truth pairs: {found} (need at least 3)")]
    TooFewPairs { found: usize },

    #[error("region correction was already applied to this cloud")]
    AlreadyCorrected,

    #[error("frame timestamp {timestamp_ms} ms is not newer than {last_ms} ms")]
    StaleFrame { timestamp_ms: f64, last_ms: f64 },

    #[error("overlap ratio {requested} could not be achieved (closest {achieved})")]
    OverlapUnachievable { requested: f64, achieved: f64 },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("median of {0} is not finite")]
    NonFiniteMedian(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// 1-based line of byte `offset` in `text`.
pub(crate) fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

pub(crate) fn config_error(text: &str, e: &toml::de::Error) -> Error {
    let line = e.span().map_or(0, |s| line_of_offset(text, s.start));
    Error::Config { line, message: e.message().to_string() }
}
