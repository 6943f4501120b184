use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid alpha: {0}")]
    InvalidAlpha(String),

    #[error("coincident points: pathloss is singular at zero distance")]
    CoincidentPoints,

    #[error("negative rate {0}")]
    NegativeRate(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("all-zero vector has no Chiu-Jain index")]
    ZeroVector,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("row {row} of fractional association sums to {sum}, expected 1")]
    NotRowStochastic { row: usize, sum: f64 },

    #[error("instance too large for exhaustive search: {num_bss}^{num_mus} exceeds 2^20")]
    OverCap { num_mus: usize, num_bss: usize },

    #[error("sensitivity undefined: {0}")]
    Sensitivity(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
