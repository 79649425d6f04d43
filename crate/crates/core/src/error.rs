use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate chromaticity: {0}")]
    DegenerateChromaticity(String),

    #[error("white point has non-positive cone response {0:?}")]
    SingularWhite([f64; 3]),

    #[error("time {t} outside schedule range [0, {end}]")]
    TimeOutOfRange { t: f64, end: f64 },

    #[error("daylight arc {arc} outside the defined range [{min}, {max}]")]
    DaylightOutOfRange { arc: f64, min: f64, max: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no readable images in {0}")]
    EmptyCorpus(PathBuf),

    #[error("missing frames: {0:?}")]
    MissingFrames(Vec<u64>),

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("malformed record on line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
