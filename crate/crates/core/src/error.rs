use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("linear solve did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("degenerate barycenter: denominator {0:.3e} below floor")]
    DegenerateBarycenter(f64),

    #[error("ground state for m = {m}: {reason}")]
    Shooting { m: f64, reason: String },

    #[error("sequence not strictly increasing at index {index}: {prev} then {next}")]
    NotIncreasing { index: usize, prev: f64, next: f64 },

    #[error("recursion hypothesis violated at r = {r}: Q(r) = {q} > Q(r-1)/theta + b = {bound}")]
    RecursionHypothesis { r: f64, q: f64, bound: f64 },

    #[error("{0}")]
    OutOfRange(String),

    #[error("winding number: {0}")]
    Winding(String),

    #[error("descent stopped ({reason}) with dual residual {residual:.3e}")]
    Descent { reason: String, residual: f64 },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("empty ensemble: {0}")]
    EmptyEnsemble(String),

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
