use std::path::PathBuf;

use crate::hsi::BandCombination;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("band index {index} out of range for {num_bands} bands")]
    BandOutOfRange { index: usize, num_bands: usize },

    #[error("band {0} has zero norm")]
    ZeroNorm(usize),

    #[error("combination count C({n}, {k}) overflows")]
    Overflow { n: u64, k: u64 },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("duplicate band combination {0}")]
    Duplicate(BandCombination),

    #[error("evaluation of {bands} failed: {message}")]
    Evaluation {
        bands: BandCombination,
        message: String,
    },

    #[error("singular normal equations; use a ridge penalty lambda > 0")]
    Singular,

    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("search space of {size} combinations exceeds the cap of {cap}")]
    SpaceTooLarge { size: u64, cap: u64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
