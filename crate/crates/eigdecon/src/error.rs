use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("empty spectrum")]
    EmptySpectrum,
    #[error("evaluation point {z} lies within the pole guard of an atom")]
    DivisionNearPole { z: Complex64 },
    #[error("newton iteration diverged after {iterations} iterations (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("newton iterate collided with an atom at {z}")]
    PoleCollision { z: Complex64 },
    #[error("first moment is zero, S-transform initialization undefined")]
    ZeroFirstMoment,
    #[error("zero value at index {index} cannot be logged")]
    ZeroValue { index: usize },
    #[error("phase jump of {gap:.3} rad at index {index}")]
    BranchJump { index: usize, gap: f64 },
    #[error("degenerate interval [{lo}, {hi}]")]
    DegenerateInterval { lo: f64, hi: f64 },
    #[error("invalid contour: {0}")]
    InvalidContour(String),
    #[error("kernel evaluation failed at x = {x}: {reason}")]
    KernelEvaluationFailed { x: f64, reason: String },
    #[error("no threshold in the ladder brings the eigenmatrix norm below {bound} (smallest norm {best:.3e})")]
    NormBoundUnreachable { bound: f64, best: f64 },
    #[error("krylov matrix has only {available} usable singular values, {needed} needed")]
    RankDeficient { needed: usize, available: usize },
    #[error("only {found} of {needed} eigenvalues passed the imaginary-part test")]
    TooFewValid { needed: usize, found: usize },
    #[error("least-squares design matrix condition {cond:.3e} exceeds 1e12")]
    IllConditionedLS { cond: f64 },
    #[error("no singular value gap reaches the factor {gap_factor} (largest ratio {ratio:.3e})")]
    NoClearGap { ratio: f64, gap_factor: f64 },
    #[error("multiplicative ensembles need strictly positive atoms")]
    NonPositiveMeasure,
    #[error("eigensolver failed: {0}")]
    EigensolveFailed(String),
    #[error("family normalization violated: {0}")]
    NormalizationViolation(String),
    #[error("invalid input `{field}`: {message}")]
    InvalidInput { field: String, message: String },
}

impl Error {
    pub(crate) fn input(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
