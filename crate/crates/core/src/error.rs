use thiserror::Error;

/// Errors raised by the numerical pipelines.
///
/// Variants are grouped into input problems (`Validation`, `DimensionMismatch`,
/// `Domain`) and failures discovered while computing (everything else). The
/// CLI maps the two groups onto distinct exit codes via [`Error::is_input_error`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical consistency error: {0}")]
    Numerical(String),

    #[error("no population flow: the detection probability is stationary on the grid")]
    NoPopulationFlow,

    #[error("no detected flow: all count differences are zero")]
    NoDetectedFlow,

    #[error("undefined bound: net transfer delta_theta is zero")]
    UndefinedBound,

    #[error("degenerate window: generalized Rabi frequency is zero")]
    DegenerateWindow,

    #[error("window too short: F(t_f, x_d) = {remaining:.3e} exceeds {limit:.1e}")]
    WindowTooShort { remaining: f64, limit: f64 },

    #[error("domain too small: boundary density {edge_density:.3e} at t = {time:.6e}")]
    DomainTooSmall { edge_density: f64, time: f64 },
}

impl Error {
    /// True for errors caused by malformed or out-of-range inputs.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::DimensionMismatch { .. } | Error::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
