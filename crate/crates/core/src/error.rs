use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("level overflow: cube at level {0} is a leaf")]
    LevelOverflow(usize),
    #[error("point outside window")]
    PointOutsideWindow,
    #[error("no cover found for cube of side {0}")]
    NoCoverFound(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shift coefficient {value} exceeds bound {bound}")]
    CoefficientBound { value: f64, bound: f64 },
    #[error("operator is not a shift-remainder commutator")]
    NotShiftRemainderCommutator,
    #[error("singular value decomposition failed")]
    SvdFailure,
    #[error("empty point set")]
    EmptySet,
    #[error("no non-degeneracy witness found")]
    WitnessNotFound,
    #[error("no ball pair found")]
    PairNotFound,
    #[error("unknown experiment: {0}")]
    UnknownExperiment(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
