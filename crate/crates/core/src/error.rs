use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector must have at least one coordinate")]
    EmptyVector,
    #[error("non-finite coordinate at index {index}")]
    NonFiniteCoordinate { index: usize },
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("halfspace system is not bounded along direction {direction}")]
    UnboundedSet { direction: String },
    #[error("level-set projection needs an interior point when h(x) > 0")]
    NoInteriorPoint,
    #[error("point is not strictly interior to the set")]
    CenterNotInterior,
    #[error("{what} did not converge after {iterations} iterations")]
    DidNotConverge { what: &'static str, iterations: usize },
    #[error("level set has no Lipschitz bound; cannot build its expansion")]
    MissingLipschitzBound,
    #[error("point lies strictly inside the set; the polar cone is trivial")]
    InsideSet,
    #[error("no Slater point is known and h(x) <= 0")]
    SlaterViolation,
    #[error("constraint subgradient vanished at a point outside the set")]
    ZeroSubgradient,
    #[error("operator returned a non-finite value")]
    NonFiniteOperatorValue,
    #[error("argument `{name}` must be positive, got {value}")]
    NonPositiveArgument { name: &'static str, value: f64 },
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("variational inequality solution is not unique: {0}")]
    NonUniqueSolution(String),
    #[error("sampling region contains no admissible points")]
    EmptyRegion,
    #[error("iterate became non-finite at iteration {iteration}; lambda or step size is mis-scaled")]
    NonFiniteIterate { iteration: usize },
    #[error("invalid configuration: {field}: {message}")]
    ConfigInvalid { field: String, message: String },
    #[error("trace is empty")]
    EmptyTrace,
    #[error("grid oracle supports at most 3 dimensions, problem has {0}")]
    DimensionTooLarge(usize),
    #[error("operator is not flagged monotone; extragradient oracle is not applicable")]
    NotMonotone,
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl ViError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        ViError::ConfigInvalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for ViError {
    fn from(e: std::io::Error) -> Self {
        ViError::Io(e.to_string())
    }
}

pub type Result<T, E = ViError> = std::result::Result<T, E>;
