use thiserror::Error;

/// Errors raised across the library.
///
/// The variants split into two families: input problems (bad parameters,
/// malformed model files) and numerical pathologies (non-convergent
/// integrals, missing sign changes). [`Error::is_input_error`] tells them
/// apart; the CLI maps them to exit codes 2 and 3.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the model or operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model violates one of the structural requirements on its scale
    /// function or speed measure.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A model specification or expression could not be parsed.
    #[error("invalid specification: {0}")]
    Spec(String),

    /// An improper integral failed to converge.
    #[error("integrability error: {0}")]
    Integrability(String),

    /// Adaptive quadrature exhausted its subdivision budget.
    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {error}")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
    },

    /// A bracketing search found no sign change.
    #[error("no root: {0}")]
    NoRoot(String),

    /// The boundary search exceeded its overflow guard.
    #[error("divergence: {0}")]
    Divergence(String),

    /// A simulated path produced a non-finite state.
    #[error("simulation fault: {0}")]
    Simulation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::InvalidModel(_) | Error::Spec(_) | Error::Io(_) | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
