use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid species: {0}")]
    InvalidSpecies(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("barrier calibration failed: {reason} (V_e bracket [{v_lo:e}, {v_hi:e}] J)")]
    CalibrationFailed { reason: String, v_lo: f64, v_hi: f64 },

    #[error("numerical blow-up at step {step}: {detail}")]
    NumericalBlowup { step: usize, detail: String },

    #[error("collapse guard: {0}")]
    CollapseGuard(String),

    #[error("run did not settle before t_end = {t_end:e} s (partial R = {partial_r})")]
    Unsettled { partial_r: f64, t_end: f64 },

    #[error("transfer-matrix instability: {0}")]
    Instability(String),

    #[error("singular tridiagonal system at row {0}")]
    Singular(usize),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
