use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used to pick CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bandwidth {0}: must be positive and finite")]
    InvalidBandwidth(f64),

    #[error("unsupported kernel moment order {0} (maximum is 6)")]
    UnsupportedMoment(usize),

    #[error("unsupported degree {degree} (maximum is {max})")]
    UnsupportedDegree { degree: usize, max: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("design matrix is rank deficient at x0 = {x0}")]
    RankDeficient { x0: f64 },

    #[error("derivative of order {order} of coefficient `{coefficient}` is unavailable")]
    MissingDerivative {
        coefficient: &'static str,
        order: usize,
    },

    #[error("right-hand side is not Lipschitz on the probe grid: {0}")]
    NotLipschitz(String),

    #[error("no minimizing bracket found at x0 = {x0}")]
    OptimizerFailure { x0: f64 },

    #[error("every bandwidth in the grid is degenerate at every point")]
    NoValidBandwidth,

    #[error("optimal bandwidth undefined: {0}")]
    UndefinedOptimum(&'static str),

    #[error("degenerate design: all x values are equal")]
    DegenerateDesign,

    #[error("response at index {index} is not positive ({value})")]
    NonPositiveResponse { index: usize, value: f64 },

    #[error("MAD undefined: every fitted value is degenerate")]
    UndefinedMad,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidBandwidth(_)
            | Error::UnsupportedMoment(_)
            | Error::UnsupportedDegree { .. }
            | Error::MissingDerivative { .. }
            | Error::NotLipschitz(_)
            | Error::Config(_) => ErrorClass::Config,
            Error::EmptyDataset
            | Error::InvalidData(_)
            | Error::DegenerateDesign
            | Error::NonPositiveResponse { .. }
            | Error::Io { .. }
            | Error::Parse { .. } => ErrorClass::Data,
            Error::RankDeficient { .. }
            | Error::OptimizerFailure { .. }
            | Error::NoValidBandwidth
            | Error::UndefinedOptimum(_)
            | Error::UndefinedMad => ErrorClass::Numerical,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(h))
    }
}
