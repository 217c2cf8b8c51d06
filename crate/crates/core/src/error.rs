use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidSpec { field: String, reason: String },

    #[error("unbounded amplitude: undamped oscillator driven exactly at its natural frequency")]
    UnboundedAmplitude,

    #[error("time step {dt:e} s too large for a {frequency} Hz drive (must be below {limit:e} s)")]
    StepTooLarge { dt: f64, frequency: f64, limit: f64 },

    #[error("empty time series")]
    EmptySeries,

    #[error("resistance decomposition leaves a negative pump head ({remainder} m)")]
    NegativeDecomposition { remainder: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("simulation failed at {frequency} Hz: {source}")]
    Sweep {
        frequency: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::UnboundedAmplitude
            | Error::NonFinite(_)
            | Error::SingularFit(_)
            | Error::DegenerateFit(_)
            | Error::EmptySeries
            | Error::StepTooLarge { .. } => true,
            Error::Sweep { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Rejects values that are not finite and strictly positive.
pub(crate) fn require_positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {value}")))
    }
}

pub(crate) fn require_non_negative(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be >= 0, got {value}")))
    }
}
