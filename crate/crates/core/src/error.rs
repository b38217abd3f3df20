use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("subsaturated: no valid minimal size M (beta0*C1 = {supply} <= alpha0 = {emission})")]
    Subsaturated { supply: f64, emission: f64 },

    #[error("delta recursion broke down at index {index} (delta = {value})")]
    DeltaBreakdown { index: usize, value: f64 },

    #[error("monomer flow degenerate: beta_1 = 0")]
    DegenerateMonomerFlow,

    #[error("custom rate model used before its assumptions were checked")]
    UncheckedCustomModel,

    #[error("newton iteration failed at t = {t} (step {step} below floor)")]
    NewtonFailure { t: f64, step: f64 },

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },

    #[error("outside characteristic domain: (t = {t}, x = {x})")]
    OutsideCharacteristicDomain { t: f64, x: f64 },

    #[error("insufficient snapshots: {0}")]
    InsufficientSnapshots(String),

    #[error("explicit step {dt} violates CFL condition; stable step is {stable_dt}")]
    Cfl { dt: f64, stable_dt: f64 },

    #[error("solver configuration: {0}")]
    Solver(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from user-supplied configuration rather than
    /// from a numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_))
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
