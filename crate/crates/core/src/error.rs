use thiserror::Error;

/// Failures of the geometric and algebraic operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("point {point:?} lies outside chart `{chart}`")]
    Domain { chart: String, point: Vec<f64> },
    #[error("field evaluation produced a non-finite value")]
    Evaluation,
    #[error("metric is singular at {0:?}")]
    SingularMetric(Vec<f64>),
    #[error("degree mismatch: {0}")]
    Degree(String),
    #[error("rank deficiency: expected {expected}, found {found}")]
    Rank { expected: usize, found: usize },
    #[error("degenerate horizontal lift: {0}")]
    Lift(String),
    #[error("vector not tangent to the zero locus (defect {0:e})")]
    Tangency(f64),
    #[error("reduction condition J(tau) = tau violated (defect {0:e})")]
    ReductionCondition(f64),
    #[error("generator {0} is not part of the algebra")]
    UnknownGenerator(usize),
    #[error("odd dimension {0}; an even dimension is required")]
    OddDimension(usize),
    #[error("matrix is not antisymmetric (residual {0:e})")]
    Asymmetry(f64),
    #[error("quadratic block has a singular body")]
    SingularBody,
    #[error("zero-mode frame mismatch: {0}")]
    FrameMismatch(String),
    #[error("point is off the zero locus (|sigma| = {0:e})")]
    OffLocus(f64),
    #[error("invalid chart: {0}")]
    InvalidChart(String),
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;
