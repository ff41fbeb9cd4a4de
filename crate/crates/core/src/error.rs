use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidGeometry(String),

    #[error("site {site} out of range for lattice with {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("axis {axis} out of range for dimension {dim}")]
    InvalidAxis { axis: usize, dim: usize },

    #[error("sites {0} and {1} are not nearest neighbors")]
    NotNeighbors(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size mismatch: expected {expected} sites, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate variance")]
    DegenerateVariance,

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown preset `{name}`; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },

    #[error("sample {sample} at p={p} failed for d={dim}, L={len}: {source}")]
    Sample {
        p: f64,
        sample: u64,
        dim: usize,
        len: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
