use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SbmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("connectivity matrix is not symmetric at ({0}, {1})")]
    NonSymmetric(usize, usize),
    #[error("connectivity matrix has a negative or non-finite entry at ({0}, {1})")]
    NegativeEntry(usize, usize),
    #[error("prior is not a positive probability vector: {0}")]
    BadPrior(String),
    #[error("rows {0} and {1} of the connectivity matrix are equal")]
    DuplicateRows(usize, usize),
    #[error("scaled edge probability {value} exceeds 1 for community pair ({i}, {j})")]
    ProbabilityOverflow { i: usize, j: usize, value: f64 },
    #[error("overlap model has {0} profile bits; at most 16 are supported")]
    TooManyProfiles(usize),
    #[error("profile lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("profile entry {0} is zero; strict divergence requires positive entries")]
    ZeroEntry(usize),
    #[error("index {index} out of range for {len} communities")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("not a partition of the community set: {0}")]
    BadPartition(String),
    #[error("eigensolver failed: {0}")]
    NumericalFailure(String),
    #[error("spectrum is degenerate: {0}")]
    DegenerateSpectrum(String),
    #[error("neighborhood of vertex {vertex} exceeded the visit budget of {budget}")]
    BudgetExceeded { vertex: usize, budget: usize },
    #[error("invalid parameter: {0}")]
    ParameterError(String),
    #[error("every unreliable classification run failed")]
    AllRunsFailed,
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("Poisson overlap grid limited to 4 dimensions, got {0}")]
    DimensionTooLarge(usize),
    #[error("label {label} at vertex {vertex} is outside 0..{k}")]
    LabelOutOfRange { vertex: usize, label: usize, k: usize },
    #[error("unknown detector `{0}`")]
    UnknownDetector(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl SbmError {
    /// Stable variant name, used by the command-line tool when reporting failures.
    pub fn kind(&self) -> &'static str {
        match self {
            SbmError::DimensionMismatch(_) => "DimensionMismatch",
            SbmError::NonSymmetric(..) => "NonSymmetric",
            SbmError::NegativeEntry(..) => "NegativeEntry",
            SbmError::BadPrior(_) => "BadPrior",
            SbmError::DuplicateRows(..) => "DuplicateRows",
            SbmError::ProbabilityOverflow { .. } => "ProbabilityOverflow",
            SbmError::TooManyProfiles(_) => "TooManyProfiles",
            SbmError::LengthMismatch(..) => "LengthMismatch",
            SbmError::ZeroEntry(_) => "ZeroEntry",
            SbmError::IndexOutOfRange { .. } => "IndexOutOfRange",
            SbmError::BadPartition(_) => "BadPartition",
            SbmError::NumericalFailure(_) => "NumericalFailure",
            SbmError::DegenerateSpectrum(_) => "DegenerateSpectrum",
            SbmError::BudgetExceeded { .. } => "BudgetExceeded",
            SbmError::ParameterError(_) => "ParameterError",
            SbmError::AllRunsFailed => "AllRunsFailed",
            SbmError::NotApplicable(_) => "NotApplicable",
            SbmError::DimensionTooLarge(_) => "DimensionTooLarge",
            SbmError::LabelOutOfRange { .. } => "LabelOutOfRange",
            SbmError::UnknownDetector(_) => "UnknownDetector",
            SbmError::Parse(_) => "Parse",
            SbmError::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for SbmError {
    fn from(e: std::io::Error) -> Self {
        SbmError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SbmError>;
