use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unsupported dimension {0}: this operation requires d = 1")]
    UnsupportedDimension(usize),

    #[error("{method} did not converge after {iterations} iterations (last gap {gap:.3e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        gap: f64,
        history: Vec<f64>,
    },

    #[error("CFL condition violated: courant number {courant:.3} exceeds {limit}")]
    Cfl { courant: f64, limit: f64 },

    #[error("node budget exceeded: {nodes} nodes > {budget}")]
    BudgetExceeded { nodes: usize, budget: usize },

    #[error("horizon {horizon} too short for burn-in {burn_in}")]
    HorizonTooShort { horizon: f64, burn_in: f64 },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
