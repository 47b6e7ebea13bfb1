use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum HeatLabError {
    #[error("space requires at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },

    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("graph is disconnected: node {0} is unreachable from node 0")]
    Disconnected(usize),

    #[error("edge endpoint {endpoint} out of range for {n} nodes")]
    EdgeOutOfRange { endpoint: usize, n: usize },

    #[error("field length {got} does not match space size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("field belongs to a different space")]
    SpaceMismatch,

    #[error("non-finite entry at index {0}")]
    NonFinite(usize),

    #[error("density does not integrate to 1: got {0}")]
    NotNormalized(f64),

    #[error("density has a negative entry at index {0}")]
    NegativeDensity(usize),

    #[error("negative entry at index {0} where a non-negative field is required")]
    NegativeEntry(usize),

    #[error("point set is empty")]
    EmptySet,

    #[error("point index {got} out of range for {n} points")]
    PointOutOfRange { got: usize, n: usize },

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("spectral decomposition refused: n={n} exceeds cap {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("spectral reconstruction residual {residual:e} exceeds {tol:e}")]
    ReconstructionResidual { residual: f64, tol: f64 },

    #[error("time {t:e} outside resolution window [{lo:e}, {hi:e}]")]
    OutsideWindow { t: f64, lo: f64, hi: f64 },

    #[error("time grid must be strictly decreasing, positive, with at least {min} entries")]
    BadTimeGrid { min: usize },

    #[error("epsilon list must be positive and strictly decreasing")]
    BadEpsList,

    #[error("ball of radius {r:e} around point {center} contains no grid point")]
    EmptyBall { center: usize, r: f64 },

    #[error("oracle truncation too short: tail estimate {tail:e} above {bound:e}")]
    OracleTruncation { tail: f64, bound: f64 },

    #[error("partition times must start at 0, end at 1 and strictly increase")]
    BadPartition,

    #[error("path has {points} points for a partition with {nodes} nodes")]
    PathLengthMismatch { points: usize, nodes: usize },

    #[error("reference path has a zero-length segment starting at node {0}")]
    ZeroLengthSegment(usize),

    #[error("time increment {dt:e} below the kernel resolution floor {floor:e}")]
    IncrementBelowResolution { dt: f64, floor: f64 },

    #[error("tube radius {r:e} below the mesh {mesh:e}")]
    RadiusBelowMesh { r: f64, mesh: f64 },

    #[error("path starts at {got}, expected the declared start {expected}")]
    PathStartMismatch { got: usize, expected: usize },

    #[error("sinkhorn did not converge after {iters} iterations (marginal defect {defect:e})")]
    SinkhornStalled { iters: usize, defect: f64 },

    #[error("transportation simplex did not terminate within {pivots} pivots")]
    SimplexStalled { pivots: usize },

    #[error("quantile oracle requires interval topology")]
    NotAnInterval,
}

pub type Result<T> = std::result::Result<T, HeatLabError>;
