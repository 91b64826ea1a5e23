use thiserror::Error;

/// Errors raised across the analysis, solver and output layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("invalid overlap L = {0}: must satisfy 0 <= L < 1")]
    InvalidOverlap(f64),

    #[error("invalid number of subdomains {0}: need at least 2")]
    InvalidSubdomainCount(usize),

    #[error("overlap L = {overlap} is not smaller than the pitch H = {pitch}; non-neighbouring subdomains would overlap")]
    TripleOverlap { overlap: f64, pitch: f64 },

    #[error("ratio identity needs exactly one damping mechanism (r = {r}, gamma = {gamma})")]
    RatioUndefined { r: f64, gamma: f64 },

    #[error("approximation regime requires gamma > 0")]
    RegimeNeedsGamma,

    #[error("degenerate cut-off mode: |lambda| = {0:e}")]
    Degenerate(f64),

    #[error("singular local solve on subdomain {subdomain} (|det| = {det:e})")]
    SingularLocalSolve { subdomain: usize, det: f64 },

    #[error("QR iteration did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("matrix must be square and non-empty with finite entries")]
    BadMatrix,

    #[error("singular banded system: pivot {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("relative residual {0:e} above tolerance after refinement")]
    NonConvergedResidual(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("Schwarz iteration diverged at iteration {iteration} (norm ratio {ratio:e})")]
    Diverged { iteration: usize, ratio: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("nothing to plot")]
    EmptyPlot,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
