use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl BenchError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 1,
            BenchError::Runtime(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            BenchError::Config(m) | BenchError::Runtime(m) => m,
        }
    }
}

impl From<blockcs::Error> for BenchError {
    fn from(e: blockcs::Error) -> Self {
        BenchError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Runtime(e.to_string())
    }
}
