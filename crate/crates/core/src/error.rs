use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum FbstError {
    #[error("parameter vector outside the parameter space: {0}")]
    Domain(String),

    #[error("expression parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid model description: {0}")]
    Spec(String),

    #[error("singular design: X'X is not positive definite")]
    SingularDesign,

    #[error("infeasible hypothesis: {0}")]
    InfeasibleHypothesis(String),

    #[error("surprise is unbounded on the hypothesis set: {0}")]
    Unbounded(String),

    #[error("sampler stuck: chain {chain} accepted no proposals")]
    SamplerStuck { chain: usize },

    #[error("sampler initialization failed: {0}")]
    Initialization(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("empty sample")]
    EmptySample,

    #[error("inconsistent decision inputs: ev(H) = {ev_h} and ev(not H) = {ev_hbar} are both below c = {threshold}")]
    InconsistentDecision {
        ev_h: f64,
        ev_hbar: f64,
        threshold: f64,
    },

    #[error("region estimator is empty")]
    EmptyRegion,

    #[error("missing surprise optimum for disjunct {row}, slot {slot}")]
    MissingComponent { row: usize, slot: usize },

    #[error("unknown criterion `{0}`")]
    UnknownCriterion(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, FbstError>;
