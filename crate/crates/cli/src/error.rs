use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Model(#[from] mfg_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for rejected input, 3 for solver failure, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        use mfg_core::Error as E;
        match self {
            CliError::Schema(_) => 2,
            CliError::Model(E::InvalidParameter { .. } | E::Domain(_) | E::Infeasible(_)) => 2,
            CliError::Model(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn residual_history(&self) -> Option<&[f64]> {
        match self {
            CliError::Model(e) => e.residual_history(),
            _ => None,
        }
    }
}
