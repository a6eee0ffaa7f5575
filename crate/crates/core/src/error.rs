use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("trap parameter out of domain: {0}")]
    Domain(String),

    #[error("unstable trap: cos(2k x_ns) = {cos_2kx:e} is not positive")]
    UnstableTrap { cos_2kx: f64 },

    #[error("no trapped solution: Coulomb force exceeds the optical restoring force (ratio {ratio:e})")]
    NoTrapSolution { ratio: f64 },

    #[error("fixed-point iteration hit the limit of {iterations} iterations (last step {residual:e} m)")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("singular sideband system (normalized determinant {determinant:e})")]
    Singular { determinant: f64 },

    #[error("trajectory diverged at t = {time:e} s (magnitude {magnitude:e})")]
    Diverged { time: f64, magnitude: f64 },

    #[error("invalid trajectory setup: {0}")]
    Trajectory(String),

    #[error("invalid sweep: {0}")]
    Sweep(String),

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors that come from the dynamics rather than from the inputs.
    pub fn is_instability(&self) -> bool {
        matches!(
            self,
            Error::UnstableTrap { .. }
                | Error::NoTrapSolution { .. }
                | Error::IterationLimit { .. }
                | Error::Singular { .. }
                | Error::Diverged { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
