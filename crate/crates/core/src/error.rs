use thiserror::Error;

pub type Result<T> = std::result::Result<T, PilmError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PilmError {
    #[error("derivative order {order} is not supported (maximum is 2)")]
    UnsupportedOrder { order: usize },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("coordinate {value} lies outside the model domain [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("observation {index} lies outside the model domain")]
    PointOutOfDomain { index: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e} against scale {scale:e})")]
    NotPositiveSemidefinite { eigenvalue: f64, scale: f64 },

    #[error("underdetermined system: normal matrix of size {size} has a deficiency of {deficiency}")]
    Underdetermined { size: usize, deficiency: usize },

    #[error("insufficient effective data: N - M + P = {dof}")]
    InsufficientData { dof: i64 },

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error("no feasible grid point: {0}")]
    NoFeasiblePoint(String),

    #[error("data error: {0}")]
    Data(String),
}

impl PilmError {
    /// Numerical failures, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            PilmError::NonFinite
                | PilmError::NotPositiveSemidefinite { .. }
                | PilmError::Underdetermined { .. }
                | PilmError::InsufficientData { .. }
                | PilmError::EigenFailure
                | PilmError::NoFeasiblePoint(_)
        )
    }
}
