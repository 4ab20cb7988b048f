use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid shape {0:?}: every dimension must be at least 1")]
    InvalidShape(Vec<usize>),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("batch normalization needs at least 2 samples in train mode, got {0}")]
    DegenerateBatch(usize),
    #[error("invalid dropout probability {0}: must satisfy 0 <= p < 1")]
    InvalidProbability(f64),
    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },
    #[error("inconsistent architecture: {0}")]
    Spec(String),
    #[error("unknown land-cover class {0:?}")]
    UnknownClass(String),
    #[error("class {class} has {count} samples, at least {min} are needed to stratify")]
    Stratification { class: String, count: usize, min: usize },
    #[error("degenerate normalization statistics: channel {channel} has zero standard deviation")]
    DegenerateStats { channel: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged in epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("image {width}x{height} is too small: both sides must be at least {min} pixels")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("image is {actual:?} but the tiling plan expects {expected:?}")]
    PlanMismatch { expected: (usize, usize), actual: (usize, usize) },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("region contains no cells once excluded classes are removed")]
    EmptyRegion,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
