use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),

    #[error("position has zero norm")]
    ZeroNorm,

    #[error("position lies below the surface plane (z = {0})")]
    NegativeHeight(f64),

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("geometry is singular: z = 0")]
    SingularGeometry,

    #[error("position coincides with surface element {0}")]
    CoincidentElement(usize),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("{pilots} pilots cannot determine {unknowns} expansion coefficients")]
    Underdetermined { pilots: usize, unknowns: usize },

    #[error("prior covariance is not symmetric positive definite")]
    InvalidPrior,

    #[error("invalid search grid: {0}")]
    InvalidGrid(&'static str),

    #[error("quantization needs at least one bit")]
    InvalidQuantization,
}
