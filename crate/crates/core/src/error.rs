use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The input violates a structural hypothesis of the model (sign, monotonicity, bounds on u0).
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("blow-up at t = {time}: u = {value} at x = {x} exceeds cap {cap}")]
    BlowUp {
        time: f64,
        x: f64,
        value: f64,
        cap: f64,
    },

    #[error("numerical failure at t = {time}: {reason}")]
    Numerical { time: f64, reason: String },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
