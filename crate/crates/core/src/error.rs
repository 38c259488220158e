use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample at flat index {index}")]
    NonFinite { index: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("derivative order {order} exceeds resolvable order {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("need at least {needed} time nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },

    #[error("time nodes are not uniformly spaced")]
    NonUniformTime,

    #[error("invalid time nodes: {0}")]
    InvalidTimeNodes(String),

    #[error("metric is not positive definite at point {point} (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { point: usize, min_eigenvalue: f64 },

    #[error("singular metric at point {point}")]
    SingularMetric { point: usize },

    #[error("volume element not preserved at point {point}: det K = {det_k}, det g det h = {det_gh}")]
    VolumeNotPreserved { point: usize, det_k: f64, det_gh: f64 },

    #[error("closed-form Christoffel symbols need flat g and h")]
    NonFlatMetric,

    #[error("time step {dt} violates the stability bound {bound}")]
    StabilityBound { dt: f64, bound: f64 },

    #[error("linear solve did not converge (gap history {gaps:?}): {reason}")]
    LinearNonConvergence { gaps: Vec<f64>, reason: String },

    #[error("Picard iteration failed: {reason}")]
    PicardFailure {
        reason: String,
        report: Box<crate::picard::IterationReport>,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("energy is zero while the norm side is {lhs:e}")]
    EnergyNormMismatch { lhs: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
