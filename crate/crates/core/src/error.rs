use alloc::string::String;
use alloc::vec::Vec;

use crate::chain::ClassDecomposition;
use crate::dp::EvaluationFailure;
use crate::linalg::Singular;
use crate::model::ValidationIssue;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("radius {0} is outside [0, 2]")]
    RadiusOutOfRange(f64),
    #[error("probability row sums to {sum}, not 1")]
    NotStochastic { sum: f64 },
    #[error("probability entry {value} at index {index} is outside [0, 1]")]
    EntryOutOfRange { index: usize, value: f64 },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty input")]
    Empty,
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown control `{0}`")]
    UnknownControl(String),
    #[error("control `{control}` is not feasible at state `{state}`")]
    InfeasibleControl { state: String, control: String },
    #[error("matrix is reducible: {0}")]
    Reducible(ClassDecomposition),
    #[error("linear system is singular (pivot {} at column {})", .0.pivot, .0.column)]
    Singular(Singular),
    #[error("{policies} stationary policies exceed the enumeration cap of {cap}")]
    EnumerationCap { policies: u128, cap: u128 },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("{0}")]
    EvaluationFailure(EvaluationFailure),
    #[error("model failed validation with {} issue(s)", .0.len())]
    Invalid(Vec<ValidationIssue>),
}

impl From<Singular> for Error {
    fn from(s: Singular) -> Self {
        Error::Singular(s)
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
