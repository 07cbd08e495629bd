use thiserror::Error;

/// A denominator factor of a terminating series vanished before termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("denominator parameter #{parameter} hits a pole at term {term}")]
pub struct PoleError {
    pub parameter: usize,
    pub term: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{param}` violates {constraint}")]
    Param { param: String, constraint: String },

    #[error(transparent)]
    Pole(#[from] PoleError),

    #[error("{0} has no minus set, so its involution is undefined")]
    InvolutionUndefined(String),

    #[error("time step {t_s} violates t_S * max(B+D) = {product} < 1")]
    StepTooLarge { t_s: f64, product: f64 },

    #[error("B+D is still growing at the cutoff x={cutoff}")]
    Unbounded { cutoff: usize },

    #[error("birth rate vanishes at interior point x={x}")]
    DivisionByZero { x: usize },

    #[error("rates are not mirror symmetric at x={x}: B(x)={birth}, D(N-x)={death}")]
    NotMirrorSymmetric { x: usize, birth: f64, death: f64 },

    #[error("mirror parity P_{n}(N-x) = (-1)^n P_{n}(x) fails at x={x}")]
    ParityViolation { n: usize, x: usize },

    #[error("eigenvalue iteration did not converge within {iterations} sweeps")]
    Convergence { iterations: usize },

    #[error("chi-square test needs at least two cells, got {cells}")]
    DegenerateBins { cells: usize },

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn param(param: &str, constraint: impl Into<String>) -> Self {
        Error::Param {
            param: param.to_string(),
            constraint: constraint.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
