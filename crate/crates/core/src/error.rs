use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("normal equations are singular (pivot {pivot:e} at column {column})")]
    SingularSystem { column: usize, pivot: f64 },

    #[error("k = {k} is outside [1, {dim}]")]
    InvalidK { k: usize, dim: usize },

    #[error("invalid bandwidth sigma = {0}")]
    InvalidSigma(f64),

    #[error("weights are empty or not strictly positive")]
    EmptyWeights,

    #[error("segmented conversion requires a segmentation map")]
    MissingSegmentation,

    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    #[error("labels have zero variance but the surrogate leaves residuals")]
    ZeroVariance,

    #[error("gold-standard feature set is empty")]
    EmptyGold,

    #[error("explained feature set is empty")]
    EmptyExplained,

    #[error("training did not converge within {iterations} iterations (final loss {loss})")]
    NonConvergence { iterations: usize, loss: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("every row of the sweep failed")]
    AllRowsFailed,

    #[error("reweighted distribution has zero total mass")]
    ZeroMass,

    #[error("enumeration over {0} binary features exceeds the cap of {max}", max = crate::oracle::MAX_ENUMERATED_DIM)]
    EnumerationCap(usize),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid model document: {0}")]
    InvalidModel(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
