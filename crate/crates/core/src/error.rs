use thiserror::Error;

/// Errors produced by the estimation and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch for `{operand}`: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        operand: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("underdetermined system: numerical rank {rank} is below the {required} unknowns")]
    Underdetermined { rank: usize, required: usize },

    #[error("underdetermined training: {slots} slots, at least {required} required")]
    InsufficientSlots { slots: usize, required: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported size {size}: {reason}")]
    UnsupportedSize { size: usize, reason: &'static str },

    #[error("matrix `{operand}` is singular to working precision")]
    Singular { operand: &'static str },

    #[error("covariance is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error(
        "dense measurement matrix needs {required} entries but the budget is {budget}; \
         use the structured operator instead"
    )]
    MemoryBudget { required: usize, budget: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Returns a [`Error::DimensionMismatch`] unless `found == expected`.
pub(crate) fn check_dims(operand: &'static str, expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            operand,
            expected,
            found,
        })
    }
}
