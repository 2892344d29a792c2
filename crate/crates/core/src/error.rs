use thiserror::Error;

/// Errors raised by the geometry, dynamics and estimator layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// No scatterer was met within the search length. Either the table has an
    /// open corridor along this ray or the configured horizon bound is too small.
    #[error("horizon violation: no collision within {limit} from ({x:.6}, {y:.6}) heading {angle:.6} rad")]
    HorizonViolation {
        x: f64,
        y: f64,
        angle: f64,
        limit: f64,
    },

    /// Incoming direction tangent to the boundary; there is nothing to reflect.
    #[error("grazing contact: |v . n| = {normal_component:.3e}")]
    Grazing { normal_component: f64 },

    #[error("integration failure: {0}")]
    Integration(String),

    /// A long run stopped early; `completed` steps were done before `source`.
    #[error("run aborted after {completed} steps: {source}")]
    Aborted { completed: u64, source: Box<Error> },
}

impl Error {
    /// The underlying error of an aborted run, or `self`.
    pub fn root(&self) -> &Error {
        match self {
            Error::Aborted { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn aborted(completed: u64, source: Error) -> Error {
        match source {
            Error::Aborted { .. } => source,
            other => Error::Aborted {
                completed,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
