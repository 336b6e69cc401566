use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rank-deficient instruments")]
    RankDeficientInstruments,
    #[error("insufficient cluster size: judge {judge} has {count} observation(s)")]
    InsufficientClusterSize { judge: usize, count: usize },
    #[error("observation {index} has unit leverage")]
    UnitLeverage { index: usize },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("parse error: {0}")]
    Parse(String),

    #[error("degenerate first stage")]
    DegenerateFirstStage,
    #[error("variance estimate nonpositive")]
    VarianceNonpositive,
    #[error("variance estimate nonpositive at β₀ = {beta0}")]
    VarianceNonpositiveAt { beta0: f64 },
    #[error("t-statistic identity violation: direct {direct} vs closed form {closed_form}")]
    IdentityViolation { direct: f64, closed_form: f64 },

    #[error("degenerate W-curve point")]
    DegenerateWCurvePoint,
    #[error("closed form undefined at ρ boundary")]
    ClosedFormBoundary,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("tangency not found in range")]
    TangencyNotFound,
    #[error("continuation step failed at T = {t}: {reason}")]
    ContinuationFailed { t: f64, reason: String },
    #[error("crossing order violated at T = {t}")]
    CrossingOrderViolated { t: f64 },
    #[error("CW quantile failure")]
    CwQuantileFailure,
    #[error("table parse error: {0}")]
    TableParse(String),
    #[error("table grid error: {0}")]
    TableGrid(String),
    #[error("two-sided table unavailable")]
    TwoSidedTableUnavailable,

    #[error("inversion failed")]
    InversionFailed,
    #[error("invalid DGP: {0}")]
    InvalidDgp(String),
    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
