use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: parse error at line {line}, column {column}: {msg}")]
    Parse { path: String, line: usize, column: usize, msg: String },

    #[error("{path}: {msg}")]
    Validation { path: String, msg: String },

    #[error("synthesis infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn validation(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Self::Validation { path: path.into(), msg: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// 2 for infeasible synthesis, 3 for bad input, 4 for numerical trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Infeasible(_) => 2,
            Self::Parse { .. } | Self::Validation { .. } | Self::Io { .. } => 3,
            Self::Numerical(_) => 4,
        }
    }

    /// Wraps a core error, tagging validation failures with `path`.
    pub fn from_core(path: &str, err: cohobs_core::Error) -> Self {
        use cohobs_core::Error as E;
        match err {
            E::Infeasible(m) | E::Precondition(m) => Self::Infeasible(m),
            E::NoUniqueSolution(_) | E::NotHurwitz { .. } | E::Singular(_) | E::Divergence { .. } => {
                Self::Numerical(err.to_string())
            }
            other => Self::validation(path, other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
