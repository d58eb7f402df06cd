use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("unknown structure `{0}`")]
    UnknownStructure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size underflow at t = {t:e} (h = {h:e}); the flow looks stiff or is blowing up")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite state at t = {t:e}")]
    NonFinite { t: f64 },

    #[error("integrator exceeded {0} steps")]
    StepBudget(usize),

    #[error("time {t} lies outside the trajectory span [0, {t_end}]")]
    TimeOutOfRange { t: f64, t_end: f64 },

    #[error("time {0} is not a sample of the Jacobi field grid")]
    NotOnGrid(f64),

    #[error("Jacobi fields live on different grids")]
    GridMismatch,

    #[error("ambiguous numerical rank; singular values {singular_values:?}")]
    AmbiguousRank { singular_values: Vec<f64> },

    #[error("zero Hamiltonian: the covector lies in H_p^-1(0) and spans a trivial geodesic")]
    ZeroHamiltonian,

    #[error("the curve meets the reference Lagrangian at the endpoint t = {0}")]
    EndpointCrossing(f64),

    #[error("no intersection with the reference Lagrangian at t = {0}")]
    NoIntersection(f64),

    #[error("degenerate crossing form at t = {0}")]
    DegenerateCrossing(f64),

    #[error("unresolved crossing cluster near t = {0}")]
    CrossingCluster(f64),

    #[error("non-ideal structure: crossing indicator vanishes on [{lo}, {hi}]")]
    NonIdealStructure { lo: f64, hi: f64 },

    #[error("covector is not conjugate")]
    NotConjugate,

    #[error("collision search failed after {iterations} iterations (best gap {best_gap:e})")]
    SearchFailure { iterations: usize, best_gap: f64 },

    #[error("monotonicity violated: Maslov index {index} but total multiplicity {multiplicity}")]
    Monotonicity { index: i64, multiplicity: usize },

    #[error("cannot certify crossing-free window endpoints: {0}")]
    Certification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
