use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown preset `{0}` (expected canonical-1d, harmonic-exact or uncoupled-1d)")]
    UnknownPreset(String),

    #[error("singularity within {distance:.3e} of the evaluation point {point:?}")]
    Singularity { point: Vec<f64>, distance: f64 },

    #[error("invalid expression: {0}")]
    Expression(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("no sea found: V1 > 0 on the whole box")]
    NoSeaFound,

    #[error("no crossing found: V1 - V2 has no sign change on the box")]
    NoCrossingFound,

    #[error("grid too coarse: well quadratic region spans {nodes:.2} nodes (need >= 4)")]
    GridTooCoarse { nodes: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("resolution error: spacing {spacing:.4e} exceeds h/4 = {limit:.4e}")]
    Resolution { spacing: f64, limit: f64 },

    #[error("no convergence after {iterations} iterations (last change {last_change:.3e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("factorization breakdown at pivot {pivot}: shift hits the spectrum")]
    FactorizationBreakdown { pivot: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("argument out of validated range: {0}")]
    Range(String),

    #[error("caustic: phase derivative vanishes at x = {x:.6}")]
    Caustic { x: f64 },

    #[error("non-transversal crossing at x = {x:.6} (margin {margin:.3e})")]
    NonTransversal { x: f64, margin: f64 },

    #[error("underflow: exp(-phi/h) = exp({exponent:.1}) below 1e-290")]
    Underflow { exponent: f64 },

    #[error("cutoff support reaches |x| = {reach:.4} beyond the undistorted region R0 = {r0:.4}")]
    SupportViolation { reach: f64, r0: f64 },

    #[error("rank-deficient design matrix (condition {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("sweep failed: {failed} of {total} records failed")]
    SweepFailed { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::UnknownPreset(_)
                | Error::Expression(_)
                | Error::InvalidModel(_)
                | Error::Config(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Precondition(_)
        )
    }
}
