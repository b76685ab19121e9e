use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix is not diagonalizable (reconstruction residual {residual:.3e}); exceptional point?")]
    NonDiagonalizable { residual: f64 },

    #[error("matrix is not Hermitian (relative residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive definite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("non-finite entries encountered in {0}")]
    NonFinite(&'static str),

    #[error("finite-difference step too large: Richardson discrepancy {discrepancy:.3e} exceeds {threshold:.1e}")]
    StepTooLarge { discrepancy: f64, threshold: f64 },

    #[error("spectral gap closed at path point {index}: gap {gap:.3e}")]
    GapClosure { index: usize, gap: f64 },

    #[error("ambiguous frame pairing at path point {index}: smallest overlap {overlap:.3e}")]
    PairingAmbiguity { index: usize, overlap: f64 },

    #[error("no degeneracy block matches the requested level")]
    LevelNotFound,

    #[error("loop is not closed (endpoint gap {gap:.3e})")]
    LoopNotClosed { gap: f64 },

    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("matrix is not pseudo-unitary (residual {residual:.3e})")]
    NotPseudoUnitary { residual: f64 },

    #[error("state blew up at step {step}")]
    NonFiniteState { step: usize },

    #[error("excited-state leakage {leakage:.3e} exceeds {threshold:.1e}; evolution is not adiabatic")]
    ExcessLeakage { leakage: f64, threshold: f64 },

    #[error("parameter out of domain: {0}")]
    ParamDomain(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Process exit status for the command-line runner: 2 for configuration
    /// problems, 3 for numerical breakdown.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigInvalid(_)
            | Error::ParamDomain(_)
            | Error::InvalidLoop(_)
            | Error::LoopNotClosed { .. }
            | Error::DimensionMismatch { .. }
            | Error::LevelNotFound
            | Error::Io(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
