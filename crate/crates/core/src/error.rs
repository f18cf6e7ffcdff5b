use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the mathematical domain of a function (poles, negative rates, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid model, discount or scenario parameters.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// Repeated roots, integer Kummer parameters and similar measure-zero parameter sets.
    #[error("unsupported degeneracy: {0}")]
    Degenerate(String),

    /// A series failed to converge or a computation lost too many digits.
    #[error("precision loss: {0}")]
    Precision(String),

    /// ODE marching produced non-finite values.
    #[error("integration failure at x = {x}: {reason}")]
    Integration { x: f64, reason: String },

    /// The ratio Z/W did not settle before the integration cap.
    #[error("no plateau in Z/W before x = {x_cap}")]
    NoPlateau { x_cap: f64 },

    /// The maximizing boundary sits on the search bracket edge.
    #[error("boundary search failed: {0}")]
    BoundarySearch(String),

    /// A 2x2 (or 3x3) weight system is singular.
    #[error("singular system: {0}")]
    Singular(String),

    /// Scenario configuration rejected; `path` names the offending field.
    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::InvalidParameter { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
