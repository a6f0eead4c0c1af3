use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frequency: {0}")]
    InvalidFrequency(String),

    #[error("qmax must be at least 1, got {0}")]
    InvalidScanRange(i64),

    #[error("homological division undefined at q=0")]
    ZeroDivisor,

    #[error("resonance: |<q,omega>| = {value:e} below floor {floor:e} at q = {q:?}")]
    Resonance { q: Vec<i32>, value: f64, floor: f64 },

    #[error("symbol mismatch: {0}")]
    Mismatch(String),

    #[error("index out of packable range: {0}")]
    IndexRange(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid truncation policy: {0}")]
    InvalidPolicy(String),

    #[error(
        "moyal bracket requires hbar > 0 (got {0}); use poisson_bracket for the classical limit"
    )]
    NonPositiveHbar(f64),

    #[error("invalid order: {0}")]
    InvalidOrder(String),

    #[error("missing generator W_{0}")]
    MissingGenerator(usize),

    #[error("support overflow: q = {q:?} does not fit a window with N = {ncut}")]
    SupportOverflow { q: Vec<i32>, ncut: i32 },

    #[error("invalid basis window: {0}")]
    InvalidWindow(String),

    #[error("interior margin {margin} smaller than combined q-spread {spread}")]
    MarginTooSmall { margin: i32, spread: i32 },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("B_{order} evaluates to a complex value ({re:e} + {im:e}i) at n = {n:?}")]
    ComplexEigenvalue {
        order: usize,
        n: Vec<i32>,
        re: f64,
        im: f64,
    },

    #[error("normal form mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
