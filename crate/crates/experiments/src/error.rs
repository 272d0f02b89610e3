use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error(transparent)]
    Core(#[from] mhlj::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid spec: {}", .0.join("; "))]
    Validation(Vec<String>),
}

pub type Result<T, E = ExpError> = std::result::Result<T, E>;
