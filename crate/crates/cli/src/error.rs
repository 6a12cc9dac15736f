//! Process-level errors. Each variant owns an exit code so `main` never has
//! to guess: 2 usage, 3 data, 4 numerical degeneracy, 5 positivity
//! unachievable. Verification failure is not an error (exit 1, reported by
//! the verify command itself).

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
    Positivity(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Positivity(_) => 5,
        }
    }

    fn code_name(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "USAGE",
            CliError::Data(_) => "DATA",
            CliError::Numerical(_) => "NUMERICAL",
            CliError::Positivity(_) => "POSITIVITY",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Data(m)
            | CliError::Numerical(m)
            | CliError::Positivity(m) => m,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error: [{}] {}", self.code_name(), self.message())
    }
}

impl From<regmask_core::Error> for CliError {
    fn from(e: regmask_core::Error) -> Self {
        use regmask_core::Error as E;
        match &e {
            E::InvalidDataset(_)
            | E::DimensionMismatch(_)
            | E::InvalidSpec(_)
            | E::InsufficientData(_) => CliError::Data(e.to_string()),
            E::PositivityUnachievable { .. } => CliError::Positivity(e.to_string()),
            E::InvalidParameters(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
