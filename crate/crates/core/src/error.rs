use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("measure support error: {0}")]
    MeasureSupport(String),

    #[error("basis construction failed: {0}")]
    BasisConstruction(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("state space of {size} states exceeds the dense limit of {limit}")]
    DenseLimit { size: u128, limit: usize },

    #[error("{n} features exceed the coalition enumeration limit of {limit}")]
    CoalitionLimit { n: usize, limit: usize },

    #[error("kernel SHAP regression is singular: {0}")]
    KernelShapDegenerate(String),

    #[error("spectrum error: {0}")]
    Spectrum(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("kernel recursion produced a non-PSD matrix: {0}")]
    KernelRecursion(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("coefficient fit failed: {0}")]
    Fit(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parameter(_) | Error::DenseLimit { .. } | Error::CoalitionLimit { .. } => {
                ErrorClass::Config
            }
            Error::MeasureSupport(_)
            | Error::Dimension(_)
            | Error::Schema(_)
            | Error::Data(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => ErrorClass::Data,
            Error::BasisConstruction(_)
            | Error::KernelShapDegenerate(_)
            | Error::Spectrum(_)
            | Error::KernelRecursion(_)
            | Error::Fit(_)
            | Error::Numeric(_) => ErrorClass::Numeric,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
