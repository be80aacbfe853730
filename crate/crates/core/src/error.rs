use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },
    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semi-definite (eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("matrix is singular or too ill-conditioned to invert")]
    Singular,
    #[error("water-filling is infeasible: all singular values are zero")]
    Infeasible,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("pilot plan mode mismatch: operation needs {0} mode")]
    ModeMismatch(&'static str),
    #[error("zero link distance between {0}")]
    ZeroDistance(&'static str),
    #[error("non-finite quantizer input")]
    NonFinite,
    #[error("NMSE undefined for an all-zero ground truth")]
    ZeroTruth,
    #[error(
        "dynamic-range multiplier {eta} too large for {levels} levels (need eta^2 < 3*levels^2/2)"
    )]
    KappaUndefined { eta: f64, levels: u64 },
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
