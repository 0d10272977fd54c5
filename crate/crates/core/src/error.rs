use thiserror::Error;

/// Errors raised by point construction, weight tables and the lattice engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point is off the curve: residuals {first:.3e} and {second:.3e}")]
    CurveViolation { first: f64, second: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no arcsin branch gives k' cos(phibar) = cos(phi) (best residual {0:.3e})")]
    BranchFailure(f64),

    #[error("division by zero in {0}")]
    DivisionByZero(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular {which} weight at l = {l}")]
    SingularWeight { which: &'static str, l: usize },

    #[error("factorized and closed-form R disagree by {deviation:.3e} at (a,b,c,d) = {at:?}")]
    FactorizationMismatch { deviation: f64, at: [usize; 4] },

    #[error("dimension {dim} exceeds the dense cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },

    #[error("partition function vanishes")]
    DegeneratePartition,

    #[error("invalid lattice specification: {0}")]
    Lattice(String),
}

pub type Result<T> = std::result::Result<T, Error>;
