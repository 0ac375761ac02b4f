use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("row {row} sums to {sum}, not 1")]
    NonStochastic { row: usize, sum: f64 },
    #[error("negative or non-finite entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("duplicate state label {0:?}")]
    DuplicateState(String),
    #[error("distribution weights invalid: {0}")]
    InvalidDistribution(String),
    #[error("stationary distribution is not unique")]
    NonUniqueStationary,
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("state {0:?} has zero stationary mass")]
    ZeroStationaryMass(String),
    #[error("matrix is not self-adjoint in the weighted inner product (asymmetry {0:e})")]
    NotSelfAdjoint(f64),
    #[error("kernel is not reversible (detailed balance defect {0:e})")]
    NotReversible(f64),
    #[error("resolvent I - (P - Pi) is numerically singular")]
    SingularResolvent,
    #[error("no scanned t has worst-pair distance below 1")]
    NoFiniteTau,
    #[error("mixing time not reached within the scanned horizon")]
    NoFiniteMixingTime,
    #[error("gap must be positive")]
    ZeroGap,
    #[error("missing field `{0}` for this variant")]
    MissingField(&'static str),
    #[error("gap parameter must be positive, got {0}")]
    NonPositiveGap(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("transition probability zero at ({0}, {1}); log-likelihood ratio is unbounded")]
    ZeroTransitionProbability(String, String),
    #[error("unknown state label {0:?}")]
    UnknownState(String),
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("threshold {xi} outside [{lo}, {hi}]")]
    ThresholdOutOfRange { xi: f64, lo: f64, hi: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Errors caused by the input itself, as opposed to a numerical routine
    /// failing on valid input.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NoConvergence(_) | Error::SingularResolvent | Error::NotSelfAdjoint(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::NonStochastic { .. } => "NonStochastic",
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::DuplicateState(_) => "DuplicateState",
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::NonUniqueStationary => "NonUniqueStationary",
            Error::NoConvergence(_) => "NoConvergence",
            Error::ZeroStationaryMass(_) => "ZeroStationaryMass",
            Error::NotSelfAdjoint(_) => "NotSelfAdjoint",
            Error::NotReversible(_) => "NotReversible",
            Error::SingularResolvent => "SingularResolvent",
            Error::NoFiniteTau => "NoFiniteTau",
            Error::NoFiniteMixingTime => "NoFiniteMixingTime",
            Error::ZeroGap => "ZeroGap",
            Error::MissingField(_) => "MissingField",
            Error::NonPositiveGap(_) => "NonPositiveGap",
            Error::InvalidInput(_) => "InvalidInput",
            Error::ZeroTransitionProbability(..) => "ZeroTransitionProbability",
            Error::UnknownState(_) => "UnknownState",
            Error::TooShort { .. } => "TooShort",
            Error::ThresholdOutOfRange { .. } => "ThresholdOutOfRange",
            Error::Parse(_) => "Parse",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
