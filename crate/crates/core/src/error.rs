use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("at least 3 knots are required, got {0}")]
    TooFewKnots(usize),
    #[error("knots must be strictly increasing (spacing {spacing} at index {index})")]
    NonIncreasingKnots { index: usize, spacing: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("cluster weight {weight} is below the admissible floor {floor}")]
    DegenerateWeight { weight: f64, floor: f64 },
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("every cluster has zero density for sample {0}")]
    AllClustersUnderflow(usize),
    #[error("cluster {k} lost all of its members")]
    EmptyCluster { k: usize },
    #[error("objective became non-finite at iteration {0}")]
    NonFiniteObjective(usize),
    #[error("leave-one-out denominator vanished at sample {i}, measurement {j}")]
    LeverageSingularity { i: usize, j: usize },
    #[error("cross-validation score is not finite")]
    NonFiniteCv,
    #[error("no smoothing candidate produced a valid cross-validation score")]
    AllCandidatesFailed,
    #[error("cannot form {c} clusters from {n} samples")]
    TooManyClusters { c: usize, n: usize },
    #[error("all {0} restarts failed")]
    AllRestartsFailed(usize),
    #[error("noise level must be in 1..=4, got {0}")]
    BadLevel(u8),
    #[error("paired result lists differ in length ({0} vs {1})")]
    UnpairedResults(usize, usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True for failures caused by the numerics of a fit rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::DegenerateWeight { .. }
                | Error::AllClustersUnderflow(_)
                | Error::EmptyCluster { .. }
                | Error::NonFiniteObjective(_)
                | Error::LeverageSingularity { .. }
                | Error::NonFiniteCv
                | Error::AllCandidatesFailed
                | Error::AllRestartsFailed(_)
        )
    }
}
