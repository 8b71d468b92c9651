use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("gain synthesis failed: {0}")]
    SynthesisFailed(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("simulation blew up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
