use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    Dimension {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite entry in {0}")]
    NotFinite(&'static str),

    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is singular to tolerance (pivot {pivot:.3e} at column {column})")]
    Singular { pivot: f64, column: usize },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("rollout diverged at step {step} (state norm {norm:.3e})")]
    Diverged { step: usize, norm: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("training failed: {diverged} of {batch} trajectories in batch {update} diverged")]
    TrainingFailed {
        update: usize,
        diverged: usize,
        batch: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
