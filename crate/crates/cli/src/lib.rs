//! Scenario runner for the `apseq` solvers: TOML scenarios in, solution
//! CSV, report JSON and a text summary out.

pub mod config;
pub mod run;
pub mod scenario;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] apseq::Error),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for input problems, 3 for convergence or boundedness preconditions,
    /// 4 for numeric failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        use apseq::Error::*;
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                Shape { .. } | Range { .. } | Domain(_) | InputContract(_) => 2,
                Convergence(_) | Boundedness(_) => 3,
                Numeric(_) => 4,
            },
        }
    }
}
