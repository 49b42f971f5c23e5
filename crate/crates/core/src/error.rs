use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid device spec: {0}")]
    InvalidSpec(String),
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("basis and operator dimensions disagree ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("coupler frequency {0} GHz outside the [3, 7] GHz window")]
    FrequencyOutOfRange(f64),
    #[error("eigensolver produced non-finite values at coupler frequency {0} GHz")]
    EigenFailure(f64),
    #[error("ambiguous adiabatic continuation at grid point {index} ({freq} GHz)")]
    AmbiguousContinuation { index: usize, freq: f64 },
    #[error("label {0:?} not tracked over the full grid")]
    MissingLabel([usize; 4]),
    #[error("trajectory value {0} GHz outside shift-curve grid")]
    OutsideGrid(f64),
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("overlapping segments on channel {0}")]
    OverlappingSegments(String),
    #[error("non-finite value during time evolution")]
    NonFinite,
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("non-physical density matrix: {0}")]
    NonPhysicalState(String),
    #[error("singular frame matrix (condition number {0:.3e})")]
    SingularFrames(f64),
    #[error("no winding numbers with |k| <= {kmax} give all durations >= {floor} ns")]
    Infeasible { kmax: i32, floor: f64 },
    #[error("phase calibration fit residual {rms:.3e} rad exceeds {limit:.3e} rad")]
    CalibrationResidual { rms: f64, limit: f64 },
    #[error("computational block is not diagonal-dominant (min |U_ii| = {0:.3})")]
    NotDiagonalDominant(f64),
    #[error("optimizer failure: {0}")]
    Optimizer(String),
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
