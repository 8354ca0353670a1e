use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid probe state: {0}")]
    InvalidState(String),

    #[error("invalid loss model: {0}")]
    InvalidLoss(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("photon number {n} exceeds the supported maximum of {max}")]
    TooManyPhotons { n: usize, max: usize },

    /// A ratio term of the bound is 0/0 at the evaluation point, so the
    /// requested derivative depends on the direction of approach.
    #[error("boundary singularity in loss branch ({lost_a}, {lost_b})")]
    BoundarySingularity { lost_a: usize, lost_b: usize },

    #[error("optimizer did not converge after {iterations} iterations (kkt residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("certification failed: kkt residual {residual:e} exceeds {limit:e}")]
    CertificationFailed { residual: f64, limit: f64 },

    #[error("projected hessian is not negative semidefinite (max eigenvalue {0:e})")]
    NotConcave(f64),

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("probe is not permutation symmetric (max deviation {0:e})")]
    NotSymmetric(f64),
}
