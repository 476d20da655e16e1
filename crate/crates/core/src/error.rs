use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} = {value} lies outside [0, 1]")]
    OutOfUnitRange { what: &'static str, value: f64 },

    #[error("wavenumber {sigma} um^-1 outside the curve's valid range [{lo}, {hi}]")]
    OutsideValidRange { sigma: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("wavenumber grids differ between spectra and transfer matrix")]
    GridMismatch,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("SVD did not converge within {0} iterations")]
    SvdNonConvergence(usize),

    #[error("power iteration did not reach tolerance {tol} in {iters} iterations")]
    PowerIterationNonConvergence { tol: f64, iters: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub fn at_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        if let Error::Stage { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::SvdNonConvergence(_)
                | Error::PowerIterationNonConvergence { .. }
                | Error::NonFinite(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
