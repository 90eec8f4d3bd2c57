//! Run configurations, command execution and CSV/JSON rendering for `dce`.

pub mod config;
pub mod render;
pub mod run;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dce_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 usage, 3 physics (divergence or domain), 4 resource, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use dce_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Core(E::InvalidInput(_)) => 2,
            CliError::Core(E::DensityDivergence { .. } | E::EnergyDivergence { .. } | E::Domain(_)) => 3,
            CliError::Core(E::Resource(_)) => 4,
            CliError::Io(_) => 1,
        }
    }

    pub fn identity(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.identity(),
            CliError::Io(_) => "io",
        }
    }
}
