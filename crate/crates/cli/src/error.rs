use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] thzstreak::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config-invalid",
            CliError::Core(e) => e.category(),
            CliError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config-invalid" => 2,
            "under-resolved-grid" => 3,
            "coverage" => 4,
            "fit-failure" => 5,
            _ => 6,
        }
    }
}
