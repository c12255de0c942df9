use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("initial data support radius {r0:.4} must be below L/2 = {limit:.4}")]
    SupportRadius { r0: f64, limit: f64 },

    #[error("invalid initial data: {0}")]
    InvalidData(String),

    #[error("operation requires t = 0, got t = {0}")]
    NonZeroTime(f64),

    #[error("order cap {requested} exceeds the allowed maximum {max}")]
    OrderCap { requested: usize, max: usize },

    #[error("blow-up detected at t = {t}: |{field}| reached {value:e}")]
    BlowUp { t: f64, field: &'static str, value: f64 },

    #[error("invalid time step {0}")]
    InvalidTimeStep(f64),

    #[error("invalid run length: {0}")]
    InvalidRunLength(String),

    #[error("quadrature failed to converge: estimated error {estimate:e} above tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("null-form index out of range: ({0}, {1})")]
    IndexOutOfRange(usize, usize),

    #[error("jet carries no second-order entries")]
    MissingSecondOrder,

    #[error("no admissible nodes remain: {0}")]
    EmptyNodeSet(String),

    #[error("check requires t >= {min}, got t = {t}")]
    TimeTooSmall { t: f64, min: f64 },

    #[error("decay fit needs at least {needed} points in the window, found {found}")]
    InsufficientPoints { needed: usize, found: usize },

    #[error("decay fit window [{t_min}, {t_max}] is invalid: {reason}")]
    InvalidWindow { t_min: f64, t_max: f64, reason: String },

    #[error("decay fit requires positive values, found {value} at t = {t}")]
    NonPositiveValue { t: f64, value: f64 },

    #[error("unknown word or generator '{0}'")]
    UnknownWord(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("observer failed: {0}")]
    Observer(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
