use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, spec or input data.
    #[error("configuration error: {0}")]
    Config(String),

    /// Newton power flow failed to converge for the given injections.
    #[error(
        "power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e} p.u.)"
    )]
    PowerFlow { iterations: usize, mismatch: f64 },

    /// A linear system that must be solved was singular.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Transient simulation failed at a given fault clearing time.
    #[error("simulation failed at fault clearing time {fct:.6} s: {source}")]
    Simulation {
        fct: f64,
        #[source]
        source: Box<Error>,
    },

    /// The expensive evaluator failed for a sample.
    #[error("evaluation failed: {0}")]
    Evaluation(String),

    /// Kriging fit failed.
    #[error("kriging fit failed: {0}")]
    Fit(String),

    /// An internal invariant was violated.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures that come from numerics or the evaluator rather than
    /// from user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PowerFlow { .. }
                | Error::Singular(_)
                | Error::Simulation { .. }
                | Error::Evaluation(_)
                | Error::Fit(_)
        )
    }
}
