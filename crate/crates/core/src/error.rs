use thiserror::Error;

/// Errors raised by the estimators, generators and their supporting geometry.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvcError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite coordinate at site {0}")]
    NonFiniteCoordinate(usize),

    #[error("adaptive bandwidth is zero at site {site}: its {neighbors} nearest neighbors share its location")]
    ZeroAdaptiveBandwidth { site: usize, neighbors: usize },

    #[error("proximity row {0} has no positive off-diagonal weight")]
    EmptyProximityRow(usize),

    #[error("invalid kernel specification: {0}")]
    InvalidKernel(String),

    #[error("bandwidth calibration failed: {0}")]
    Calibration(String),

    #[error("all {0} local systems are singular")]
    AllSitesSingular(usize),

    #[error("Moran coefficient is undefined: {0}")]
    UndefinedMoran(&'static str),

    #[error("connectivity matrix is not symmetric")]
    NonSymmetricConnectivity,

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, SvcError>;
