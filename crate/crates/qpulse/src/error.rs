//! Process-level error carrying the documented exit codes.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Malformed flags, config, or input files: exit 2.
    BadInput(String),
    /// A design solver failed to converge: exit 3.
    NonConvergence(String),
    /// Time integration failed: exit 4.
    Integration(String),
    /// An embedded reproduction check failed: exit 5.
    CheckFailed(String),
    /// Filesystem trouble: exit 1.
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::BadInput(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Integration(_) => 4,
            CliError::CheckFailed(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::BadInput(m) => write!(f, "bad input: {m}"),
            CliError::NonConvergence(m) => write!(f, "solver did not converge: {m}"),
            CliError::Integration(m) => write!(f, "integration failed: {m}"),
            CliError::CheckFailed(m) => write!(f, "reproduction check failed: {m}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<qpulse_core::rio::RioError> for CliError {
    fn from(e: qpulse_core::rio::RioError) -> Self {
        use qpulse_core::rio::RioError;
        match e {
            RioError::BadInput(_) | RioError::Model(_) => CliError::BadInput(e.to_string()),
            _ => CliError::NonConvergence(e.to_string()),
        }
    }
}

impl From<qpulse_core::tcap::TcapError> for CliError {
    fn from(e: qpulse_core::tcap::TcapError) -> Self {
        use qpulse_core::tcap::TcapError;
        match e {
            TcapError::BadInput(_) | TcapError::Model(_) => CliError::BadInput(e.to_string()),
            _ => CliError::NonConvergence(e.to_string()),
        }
    }
}

impl From<qpulse_core::tdse::TdseError> for CliError {
    fn from(e: qpulse_core::tdse::TdseError) -> Self {
        CliError::Integration(e.to_string())
    }
}

impl From<qpulse_core::robustness::RobustnessError> for CliError {
    fn from(e: qpulse_core::robustness::RobustnessError) -> Self {
        use qpulse_core::robustness::RobustnessError;
        match e {
            RobustnessError::BadInput(_) => CliError::BadInput(e.to_string()),
            _ => CliError::Integration(e.to_string()),
        }
    }
}
