use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("{what} = {value} is outside the supported range (table limit {limit})")]
    Range {
        what: &'static str,
        value: i64,
        limit: u64,
    },

    #[error("sieve limit {limit} needs {needed} bytes, over the memory budget of {budget} bytes")]
    Resource {
        limit: u64,
        needed: u64,
        budget: u64,
    },

    #[error("prime table too small: need limit >= {required}, have {have}")]
    TableTooSmall { required: u64, have: u64 },

    #[error("grid of size {grid} cannot hold a signal of support width {width} without aliasing")]
    Aliasing { grid: usize, width: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("no certified outcome: {0}")]
    NoCertificate(String),

    #[error("search budget of {budget} nodes exhausted")]
    BudgetExhausted { budget: u64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
