//! Configuration-driven experiments on top of `qchain`: trajectories, steady
//! states, two-versus-three-qubit sweeps and the validation suite.

pub mod config;
pub mod csv;
pub mod runs;
pub mod validate;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] qchain::Error),
    #[error("{failed} of {total} validation checks failed")]
    ChecksFailed { failed: usize, total: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for failed checks or numerical breakdown, 2 for bad input or an unsupported physical regime.
    pub fn exit_code(&self) -> i32 {
        use qchain::Error as E;
        match self {
            Self::ChecksFailed { .. } => 1,
            Self::Model(E::ToleranceNotMet { .. } | E::PositivityLost { .. } | E::TraceDrift { .. }) => 1,
            Self::Model(_) | Self::Config(_) | Self::Io(_) => 2,
        }
    }
}
