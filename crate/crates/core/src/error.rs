use crate::fem::Space;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tag mismatch: expected {expected}, found {found}")]
    TagMismatch { expected: String, found: String },

    #[error("dimension mismatch for space {space} on level {level}: expected {expected}, found {found}")]
    Dimension { space: Space, level: usize, expected: usize, found: usize },

    #[error("mass matrix of the pencil is not positive definite")]
    IndefiniteMass,

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("eigenpair residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    EigenResidual { residual: f64, tolerance: f64 },

    #[error("operator or preconditioner is not positive definite ({0})")]
    Indefinite(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
