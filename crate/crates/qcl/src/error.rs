use thiserror::Error;

/// Errors surfaced by the landscape-exploration pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown preset tag `{0}`")]
    UnknownPreset(String),

    #[error("control fields are defined on different time grids")]
    GridMismatch,

    #[error("control field contains non-finite values")]
    NonFiniteField,

    #[error("propagation history was not kept; re-run with keep_history = true")]
    MissingHistory,

    #[error("level target {target} lies outside the open landscape range ({lo}, {hi})")]
    LevelOutOfRange { target: f64, lo: f64, hi: f64 },

    #[error("initial field sits at J = {j}, not at the required level {level} (tolerance {tol})")]
    NotAtLevel { j: f64, level: f64, tol: f64 },

    #[error("flow exceeded {max_steps} steps at J = {j} (target {target})")]
    MaxStepsExceeded {
        max_steps: usize,
        j: f64,
        target: f64,
    },

    #[error("gradient norm collapsed to {norm:.3e} at J = {j} before reaching {target}; the flow stalled")]
    GradientStall { norm: f64, j: f64, target: f64 },

    #[error("step-size control failed to make progress (h = {h:.3e})")]
    StepSizeUnderflow { h: f64 },

    #[error("degenerate random field: all mode amplitudes vanished")]
    DegenerateField,

    #[error("trajectory endpoints coincide; R is undefined")]
    ZeroDisplacement,

    #[error("every time point was masked when dividing by the field displacement")]
    EmptyDeltaMask,

    #[error("{0} distinct eigenvalue groups do not match {1} margins")]
    MarginMismatch(usize, usize),

    #[error("linear algebra backend error: {0}")]
    LinAlg(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::LinAlg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
