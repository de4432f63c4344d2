use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index out of range: {what} {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("pair (user {user}, question {question}) is already assigned")]
    DuplicateAssignment { user: usize, question: usize },
    #[error("answer matrix holds no responses")]
    EmptyAnswers,
    #[error("no eligible user left for question {question}")]
    NoEligibleUser { question: usize },
    #[error("budget of {requested} labels exceeds the {available} available pairs")]
    BudgetExceeded { requested: usize, available: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{policy} trial {trial} at sweep point {point}: {source}")]
    Trial {
        policy: &'static str,
        point: String,
        trial: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
