use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph must contain at least one agent")]
    EmptyGraph,
    #[error("edge ({0}, {1}) references a node outside 1..={2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("power iteration did not converge within {0} iterations")]
    PowerIterationFailed(usize),
    #[error("communication graph violates the spanning-tree assumption")]
    NoCommonRoot,
    #[error("mixing parameter {name} = {value} must lie in (0, 1]")]
    MixingParameter { name: &'static str, value: f64 },

    #[error("invalid cost for agent {agent}: {reason}")]
    InvalidCost { agent: usize, reason: String },
    #[error("infeasible balance: total demand {demand} outside [{lo}, {hi}] (Slater condition violated)")]
    Infeasible { demand: f64, lo: f64, hi: f64 },
    #[error("perturbation |db| = {db} exceeds the adjacency bound delta = {delta}")]
    PerturbationTooLarge { db: f64, delta: f64 },
    #[error("agent index {0} out of range for a problem with {1} agents")]
    AgentOutOfRange(usize, usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("Laplace scale must be positive, got {0}")]
    LaplaceScale(f64),
    #[error("divergent series: {0}")]
    Divergent(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
