use thiserror::Error;

/// Errors raised by the pricing engine and its supporting numerics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid cost structure: {0}")]
    InvalidCost(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The constant-proportion diffusion coefficient σ² − 2kσ√(2/(πδt)) is not positive.
    #[error("ill-posed: adjusted variance {radicand:.6e} is not positive")]
    IllPosed { radicand: f64 },

    #[error("quadrature did not converge: estimated error {estimate:.3e} after {subdivisions} subdivisions")]
    QuadratureNotConverged { estimate: f64, subdivisions: usize },

    /// The explicit scheme would be unstable with the requested time step.
    #[error("unstable time step: n_time = {requested} but at least {required} steps are needed")]
    Unstable { requested: usize, required: usize },

    /// `violations` counts the well-posedness violations seen before the blow-up.
    #[error("non-finite value at node {node} (S = {spot}), time index {time_index} after {violations} well-posedness violations")]
    NonFinite {
        node: usize,
        spot: f64,
        time_index: usize,
        violations: usize,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("query out of domain: {0}")]
    OutOfDomain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
