use thiserror::Error;

pub type Result<T> = std::result::Result<T, DqmError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DqmError {
    #[error("parameter `{parameter}` out of domain: {constraint}")]
    OutOfDomain { parameter: String, constraint: String },

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("closed form has a pole at x = {0}")]
    EvaluationSingularity(i64),

    #[error("negative square-root argument {value:e} at x = {x}")]
    NegativePotential { x: usize, value: f64 },

    #[error("non-positive potential {value:e} at step {step}, x = {x}")]
    NonPositivePotential { step: usize, x: usize, value: f64 },

    #[error("tridiagonal eigensolver did not converge for index {index} after {iterations} iterations")]
    ConvergenceFailure { index: usize, iterations: usize },

    #[error("sample at x = {x} requested outside [{lo}, {hi}]")]
    DomainExceeded { x: i64, lo: i64, hi: i64 },

    #[error("Casoratian prefactor vanishes (coincident levels {0:?})")]
    ZeroPrefactor(Vec<usize>),

    #[error("denominator vanishes at x = {0}")]
    ZeroDenominator(i64),

    #[error("phi_1/phi_0 is not affine in eta (residual {0:e})")]
    AffineCheckFailed(f64),

    #[error("intermediate breakdown at deletion step {step}: eigenfunction vanishes at x = {x}")]
    IntermediateBreakdown { step: usize, x: usize },

    #[error("deletion set {levels:?} is inadmissible: every cluster of contiguous levels not starting at 0 must have even length")]
    Inadmissible { levels: Vec<usize> },

    #[error("level {level} outside the spectrum 0..={n_max}")]
    LevelOutOfRange { level: usize, n_max: usize },

    #[error("fitted degree {fitted} differs from expected {expected}")]
    DegreeMismatch { expected: usize, fitted: usize },

    #[error("leading coefficient B(x) vanishes at x = {0} before the boundary")]
    ZeroLeadingCoefficient(usize),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("P_{n}(a) vanishes: node is a root")]
    NodeZero { n: usize },

    #[error("{what} is not implemented for family `{family}`")]
    NotImplementedForFamily { family: String, what: String },

    #[error("positivity fails at x = {x} (value {value:e})")]
    PositivityFailure { x: usize, value: f64 },

    #[error("system is not hermitian: {0}")]
    NonHermitianSystem(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

impl DqmError {
    pub fn out_of_domain(parameter: impl Into<String>, constraint: impl Into<String>) -> Self {
        DqmError::OutOfDomain {
            parameter: parameter.into(),
            constraint: constraint.into(),
        }
    }
}
