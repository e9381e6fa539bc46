use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("integration diverged at t = {t} ms (state component {component} = {value})")]
    NonFinite {
        t: f64,
        component: usize,
        value: f64,
    },

    #[error("analysis window too short: {0}")]
    TooShort(String),

    #[error("weighted normal equations are rank deficient at t = {t0}")]
    SingularFit { t0: f64 },

    #[error("neighborhood at t = {t0} has {have} weighted points, need {need}")]
    InsufficientData { t0: f64, have: usize, need: usize },

    #[error("every candidate span produced a singular fit")]
    AllFailed,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("all regression times are equal")]
    DegenerateTimes,

    #[error("non-positive standard deviation {sd} at index {index}")]
    NonPositiveSd { index: usize, sd: f64 },

    #[error("model simulation failed: {0}")]
    SimulationFailed(Box<Error>),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("initial (gsyn = {gsyn}, Iapp = {iapp}) lies outside the feasible region")]
    InitialOutsideRegion { gsyn: f64, iapp: f64 },

    #[error("summary window is empty (burn-in {burn_in}, chain length {len})")]
    EmptyWindow { burn_in: usize, len: usize },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
