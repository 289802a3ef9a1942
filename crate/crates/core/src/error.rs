use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("row {row} sums to {sum} (must be 1 within 1e-12) or has entries outside [0,1]")]
    NotStochastic { row: usize, sum: f64 },

    #[error("detailed balance violated: |pi_i P_ij - pi_j P_ji| = {violation:e} at ({i}, {j})")]
    NotReversible { i: usize, j: usize, violation: f64 },

    #[error("chain is reducible: {0}")]
    Reducible(String),

    #[error("chain is periodic (bipartite transition graph without holding probability)")]
    Periodic,

    #[error("stationary distribution must be strictly positive (entry {index} = {value:e})")]
    NonPositivePi { index: usize, value: f64 },

    #[error("stationary solver did not converge: residual {residual:e}")]
    NoConvergence { residual: f64 },

    #[error("symmetric eigensolver failed: {0}")]
    EigensolverFailure(String),

    #[error("threshold not attained within n_max = {n_max} steps")]
    NotAttained { n_max: u64 },

    #[error("bound does not apply: {0}")]
    PreconditionViolated(String),

    #[error("insufficient samples: need more than {required}, have {available}")]
    InsufficientSamples { required: u64, available: u64 },

    #[error("eta = {eta} exceeds the certified half-width {half_width}; choose a smaller eta")]
    EtaTooLarge { eta: f64, half_width: f64 },

    #[error("Berry-Esseen interval requires N >= {required:.0}, have {available}")]
    MinimumNUnmet { required: f64, available: u64 },

    #[error("eigenvalue {lambda} too close to 1 for a finite asymptotic variance")]
    GapTooSmall { lambda: f64 },

    #[error("sample stream exhausted after {consumed} values")]
    StreamExhausted { consumed: u64 },

    #[error("required data missing: {0}")]
    DataMissing(String),

    #[error("invalid data: {0}")]
    InvalidData(String),
}

impl Error {
    /// True for errors that mean "this bound or interval does not apply here"
    /// rather than "the input was malformed".
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::PreconditionViolated(_)
                | Error::InsufficientSamples { .. }
                | Error::EtaTooLarge { .. }
                | Error::MinimumNUnmet { .. }
                | Error::NotAttained { .. }
                | Error::GapTooSmall { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
