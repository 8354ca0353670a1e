//! Library side of the `qfi-optics` command-line tool: file formats, sweep
//! orchestration and plotting. `main.rs` only parses arguments.

pub mod io;
pub mod plot;
pub mod sweep;

use thiserror::Error;

pub const TOOL_NAME: &str = "qfi-optics";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Certification(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<qfi_optics::Error> for CliError {
    fn from(e: qfi_optics::Error) -> Self {
        use qfi_optics::Error as E;
        match e {
            E::InvalidState(_)
            | E::InvalidLoss(_)
            | E::IndexOutOfRange(_)
            | E::TooManyPhotons { .. }
            | E::Domain(_)
            | E::InvalidPovm(_)
            | E::NotSymmetric(_) => CliError::Input(e.to_string()),
            E::CertificationFailed { .. } | E::NotConverged { .. } | E::NotConcave(_) => {
                CliError::Certification(e.to_string())
            }
            E::BoundarySingularity { .. } | E::Bracket(_) => CliError::Internal(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
