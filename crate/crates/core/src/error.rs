use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid resolution too small: {points_per_cell} points per cell (need at least 8)")]
    ResolutionTooSmall { points_per_cell: usize },

    #[error("grid needs at least one cell")]
    NoCells,

    #[error("non-finite sample at x = {x}")]
    NonFiniteSample { x: f64 },

    #[error("fields live on different grids ({left} vs {right})")]
    GridMismatch { left: String, right: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step rejected at t = {t}: CFL guard still violated after 8 halvings (sup|u| = {sup_u})")]
    StepRejected { t: f64, sup_u: f64 },

    #[error("state became non-finite at t = {t} (blow-up)")]
    BlowUp { t: f64 },

    #[error("time step {dt} does not divide the unit period")]
    StepNotDividingPeriod { dt: f64 },

    #[error("unresolved nodal matching near t = {t}: {reason}")]
    UnresolvedMatching { t: f64, reason: String },

    #[error("window [{s}, {t}) is outside the recorded range [{t0}, {t1}]")]
    WindowOutOfRange { s: f64, t: f64, t0: f64, t1: f64 },

    #[error("no probe recorded at x = {x}")]
    MissingProbe { x: f64 },

    #[error("no snapshot recorded at t = {t}")]
    MissingSnapshot { t: f64 },

    #[error("operation requires a Burgers-type nonlinearity")]
    NotBurgers,

    #[error("operation requires a gradient nonlinearity")]
    NotGradient,

    #[error("mass mismatch: field has mass {found}, expected {expected}")]
    MassMismatch { expected: f64, found: f64 },

    #[error("fixed-point iteration for y = {y} did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { y: f64, iterations: usize, residual: f64 },

    #[error("orbit family is not strictly ordered between y = {lower} and y = {upper} (min gap {gap:e})")]
    OrderingViolation { lower: f64, upper: f64, gap: f64 },

    #[error("Cole-Hopf potential lost positivity (min {min:e})")]
    NonPositivePotential { min: f64 },

    #[error("profile endpoints disagree by {gap:e}")]
    EndpointMismatch { gap: f64 },

    #[error("member {member} failed: {source}")]
    Member {
        member: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
