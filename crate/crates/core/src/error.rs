// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{0}` conflicts with `{1}`")]
    Conflict(String, String),
    #[error("non-positive path gain: {0}")]
    NonPositivePathLoss(String),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("malformed channel file, line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("channel dump needs a single phi, users have {0:?}")]
    NonUniformPhi(Vec<f64>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("unidentifiable geometry: CRB denominator {0:e} is not positive")]
    UnidentifiableGeometry(f64),
    #[error("beamformer vectors have not been extracted")]
    MissingVectors,
    #[error("negative surrogate rate {rate} for user {user}")]
    NegativeRate { user: usize, rate: f64 },
    #[error("zero matrix has no rank ratio")]
    ZeroMatrix,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("matrix is not Hermitian: {0}")]
    NotHermitian(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite problem data: {0}")]
    NonFinite(String),
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("solver setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("report needs a converged run, got status `{0}`")]
    NotConverged(String),
    #[error("no samples requested")]
    NoSamples,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("no rows to emit")]
    EmptyRows,
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
