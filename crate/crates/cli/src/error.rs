use sip_core::ErrorClass;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] sip_core::Error),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Machine-readable class printed on the error line.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(e) => e.class().as_str(),
            CliError::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e.class() {
                ErrorClass::Argument => 2,
                ErrorClass::Model => 3,
                ErrorClass::Assumption => 4,
                ErrorClass::Io => 1,
            },
        }
    }

    /// One line, safe to parse: `error: class=<class> message=<text>`.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error: class={} message={msg}", self.class())
    }
}
