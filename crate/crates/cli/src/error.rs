use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] levymlmc::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Machine-readable error record written to stderr.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        use levymlmc::Error as E;
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Core(e) => match e {
                E::Domain(_) => "domain",
                E::Config(_) => "config",
                E::InfeasibleSchedule(_) => "infeasible_schedule",
                E::SchemeUnsupported { .. } => "scheme_unsupported",
                E::SingularJump { .. } => "singular_jump",
                E::InsufficientData(_) => "insufficient_data",
                E::MissingReference => "missing_reference",
                E::PrecisionOutOfRange(_) => "precision_out_of_range",
                E::Numeric(_) => "numeric",
            },
        }
    }

    /// 2: invalid input, 3: infeasible schedule, 4: runtime numeric or i/o failure.
    pub fn exit_code(&self) -> i32 {
        use levymlmc::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 4,
            CliError::Core(e) => match e {
                E::InfeasibleSchedule(_) => 3,
                E::SingularJump { .. } | E::Numeric(_) => 4,
                _ => 2,
            },
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}
