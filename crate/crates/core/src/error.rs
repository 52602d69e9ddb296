use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("monomial basis for n={dimension}, d={degree} exceeds the addressable size")]
    BasisTooLarge { dimension: usize, degree: usize },

    #[error("insufficient samples: need at least {required} (basis size), got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error(
        "moment matrix of size {size} is not positive definite; \
         add a ridge term or lower the degree"
    )]
    SingularMomentMatrix { size: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("calibration set is empty")]
    EmptyCalibration,

    #[error("outlier budget p={p} violates 2p+1 < N with N={n_cal}")]
    OutlierBudget { n_cal: usize, p: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no coverage error in (0,1) satisfies the bound; N must be at least {min_samples:.1}")]
    NoRoot { min_samples: f64 },

    #[error("trajectory from initial point {initial:?} diverged")]
    IntegrationBlowUp { initial: Vec<f64> },

    #[error("system `{system}` has no closed-form reach set")]
    UnsupportedOracle { system: String },

    #[error("rejection sampling gave up after {attempts} attempts")]
    RejectionExhausted { attempts: usize },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMomentMatrix { .. }
                | Error::IntegrationBlowUp { .. }
                | Error::RejectionExhausted { .. }
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::BasisTooLarge { .. } => "basis_too_large",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::SingularMomentMatrix { .. } => "singular_moment_matrix",
            Error::NonFinite { .. } => "non_finite",
            Error::EmptyCalibration => "empty_calibration",
            Error::OutlierBudget { .. } => "outlier_budget",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NoRoot { .. } => "no_root",
            Error::IntegrationBlowUp { .. } => "integration_blow_up",
            Error::UnsupportedOracle { .. } => "unsupported_oracle",
            Error::RejectionExhausted { .. } => "rejection_exhausted",
            Error::Malformed(_) => "malformed",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
