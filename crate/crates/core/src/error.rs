use thiserror::Error;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trajectory discontinuity at t={t}: position gap {gap_p}, velocity gap {gap_v}")]
    Discontinuity { t: f64, gap_p: f64, gap_v: f64 },

    #[error("malformed point cloud text at line {line}: {msg}")]
    CloudFormat { line: usize, msg: String },

    #[error("scenario {origin}: {msg}")]
    Scenario { origin: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CoreError::InvalidArgument(format!("{what} must be finite")))
    }
}
