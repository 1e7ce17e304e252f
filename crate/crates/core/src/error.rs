use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sampling grids do not match")]
    GridMismatch,
    #[error("field has zero norm")]
    DegenerateField,
    #[error("intensity profile is zero or not finite")]
    DegenerateProfile,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("plane index {index} out of range 1..={planes}")]
    PlaneIndex { index: usize, planes: usize },
    #[error("parameter `{name}` = {value} is out of range")]
    ParameterRange { name: &'static str, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fit failed: {0}")]
    FitFailure(String),
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
