use thiserror::Error;

use crate::affine::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or dimensions are inconsistent; distinct from an admissibility failure.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("parameters rejected:\n{0}")]
    Rejected(ValidationReport),

    /// The Riccati system left every bounded set before the requested horizon.
    #[error("moment explosion before T: solution blew up near t = {time:.6e}")]
    MomentExplosion { time: f64 },

    #[error("damping parameter {damping} outside moment domain for maturity {maturity}")]
    DampingOutsideMomentDomain { damping: f64, maturity: f64 },

    #[error("insufficient decay: integrand still contributes {last_panel:.3e} at u = {u_max}")]
    InsufficientDecay { u_max: f64, last_panel: f64 },

    #[error("no implied vol: price {price} outside ({lower}, {upper})")]
    NoImpliedVol { price: f64, lower: f64, upper: f64 },

    #[error("degenerate correlation (rho^2 = 1): premium not representable")]
    DegenerateCorrelation,

    #[error("functional {functional} requires a {expected} batch, got {actual}")]
    MeasureMismatch {
        functional: &'static str,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
