use thiserror::Error;

/// Failure while reading or validating a robot model.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid model field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("unknown robot `{0}` (expected one of: comau, iiwa, panda, or a model file path)")]
    UnknownRobot(String),
}

impl ModelError {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("expected {expected} joint values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("joint vector contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("rotation matrix is not orthonormal (deviation {0:.3e})")]
    NonOrthonormal(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum SingularityError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("unknown singularity condition `{0}`")]
    UnknownCondition(String),
    #[error("no closed-form manipulability for the Panda: its symbolic expression is omitted as too long to state, use the numeric index instead")]
    PandaUnsupported,
    #[error("closed form uses tan(q3), which has a pole at this configuration")]
    TangentPole,
    #[error("operation not supported for robot `{0}`")]
    UnsupportedModel(String),
    #[error("expected a {expected} matrix, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("wrist block is singular; the elimination is undefined here")]
    SingularWristBlock,
}

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("invalid trajectory problem: {0}")]
    InvalidProblem(String),
    #[error("sampling time must be positive, got {0}")]
    NonPositiveStep(f64),
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("invalid benchmark config: {0}")]
    Config(String),
    #[error("gave up after {0} rejected endpoint samples; joint limits look degenerate")]
    RejectionBudget(usize),
    #[error("benchmark I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot serialize benchmark output: {0}")]
    Serialize(#[from] serde_json::Error),
}
