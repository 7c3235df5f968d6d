use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Fock cutoff {0}: need at least 2 levels")]
    InvalidCutoff(usize),

    #[error("mode index {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid loss efficiency {0}: must lie in (0, 1]")]
    InvalidEfficiency(f64),

    #[error("truncation error: top Fock level of mode {mode} holds population {population:.3e}")]
    Truncation { mode: usize, population: f64 },

    #[error("stellar rank {rank} does not fit in {modes} modes with cutoff {cutoff}")]
    RankTooLarge { rank: usize, modes: usize, cutoff: usize },

    #[error("degaussification has vanishing success probability ({0:.3e})")]
    ZeroProbability(f64),

    #[error("grid too narrow: {0:.3e} probability mass lost")]
    GridMassLoss(f64),

    #[error("density is identically zero")]
    ZeroDensity,

    #[error("binning mismatch: {0}")]
    BinningMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown task '{0}'")]
    UnknownTask(String),

    #[error("missing {0}")]
    Missing(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Broad failure class, used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Truncation { .. }
            | Error::ZeroProbability(_)
            | Error::GridMassLoss(_)
            | Error::ZeroDensity
            | Error::Numerical(_) => ErrorClass::Numerical,
            Error::Io(_) | Error::Json(_) | Error::Format(_) | Error::Checksum(_) | Error::Version { .. } => {
                ErrorClass::Io
            }
            _ => ErrorClass::Validation,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Validation => 2,
            ErrorClass::Numerical => 3,
            ErrorClass::Io => 4,
        }
    }
}
