use thiserror::Error;

/// Errors raised by the library. The variants map onto the CLI exit codes
/// (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular section: effective thickness loss {dtau} mm reaches thickness {tau} mm")]
    SingularSection { dtau: f64, tau: f64 },

    #[error("input ({e}, {dtau}) outside trained range E in [{e_lo}, {e_hi}], dtau in [{d_lo}, {d_hi}]")]
    OutOfRange {
        e: f64,
        dtau: f64,
        e_lo: f64,
        e_hi: f64,
        d_lo: f64,
        d_hi: f64,
    },

    #[error("rank-deficient design matrix: {0}")]
    RankDeficient(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing prerequisite: {what} (run `{command}` first)")]
    MissingPrerequisite { what: String, command: String },

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("convergence gate failed: {0}")]
    ConvergenceGate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 config, 3 convergence gate, 4 data, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::MissingPrerequisite { .. } | Error::InvalidDistribution(_) => 2,
            Error::ConvergenceGate(_) => 3,
            Error::Data(_) | Error::DimensionMismatch { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
