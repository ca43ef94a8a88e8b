use pfl_core::Error as CoreError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::NonFinite { .. }
            | CoreError::NonFiniteLoss { .. }
            | CoreError::Degenerate(_)
            | CoreError::OutOfDomain { .. }
            | CoreError::TapeMismatch(_) => CliError::Numeric(msg),
            CoreError::DimensionMismatch { .. }
            | CoreError::InvalidArgument(_)
            | CoreError::Unsupported { .. } => CliError::Config(msg),
            CoreError::Data(_) | CoreError::Csv(_) | CoreError::Json(_) | CoreError::Io(_) => {
                CliError::Io(msg)
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
