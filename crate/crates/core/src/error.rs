use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance is not positive definite; increase the regularization")]
    NotPositiveDefinite,

    #[error("every particle produced a non-finite residual at step {step}")]
    NonFiniteResiduals { step: usize },

    #[error("particle state became non-finite during the time update at step {step}")]
    NonFiniteState { step: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unsupported Legendre order {0}; only 3, 5 and 7 are available")]
    UnsupportedLegendreOrder(u32),

    #[error("filter taps are all zero; no energy peak to split on")]
    NoPeak,

    #[error("schedule needs {needed} samples but the signal has only {available}")]
    ScheduleTooLong { needed: usize, available: usize },

    #[error("unsupported WAV file {path}: expected 16-bit PCM, mono, 16000 Hz; found {found}")]
    WavFormat { path: PathBuf, found: String },

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
