use thiserror::Error;

/// Coarse error category, used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Guard,
}

#[derive(Debug, Error)]
pub enum ZenoError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("domain does not fit inside the grid: {0}")]
    DomainOutsideGrid(String),

    #[error("pgm: {0}")]
    Pgm(String),

    #[error(
        "wrap-around guard violated: tau = {tau:e} needs padding margin {required:.6} but axis {axis} only has {margin:.6}"
    )]
    GuardViolated { axis: usize, tau: f64, margin: f64, required: f64 },

    #[error("limit-order constraint unsatisfiable: {constraint}; needs N >= {required} but the step budget is {budget}")]
    LimitOrder { constraint: String, required: u64, budget: u64 },

    #[error("non-finite amplitude after step {step}: {reason}")]
    NumericalFailure { step: usize, reason: String },

    #[error("no sign change found for order {order} below k = {k_max}")]
    RootNotBracketed { order: f64, k_max: f64 },

    #[error("eigensolver did not converge: {0}")]
    EigenSolver(String),

    #[error("basis is not orthonormal: max Gram deviation {0:e}")]
    NonOrthonormalBasis(f64),

    #[error("reference basis too small: projection deficit {deficit:e} exceeds {limit:e}; try at least {suggested} modes")]
    BasisTooSmall { deficit: f64, limit: f64, suggested: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ZenoError {
    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        ZenoError::InvalidParameter { field: field.to_string(), reason: reason.into() }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            ZenoError::InvalidParameter { .. }
            | ZenoError::GridMismatch(_)
            | ZenoError::DomainOutsideGrid(_)
            | ZenoError::Pgm(_)
            | ZenoError::Io(_) => ErrorClass::Validation,
            ZenoError::GuardViolated { .. } | ZenoError::LimitOrder { .. } => ErrorClass::Guard,
            _ => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, ZenoError>;
