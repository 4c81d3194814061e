use thiserror::Error;

/// Exit codes: 1 usage, 2 configuration, 3 unsettled run, 4 numerical failure.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{module}: {source}")]
    Engine {
        module: &'static str,
        #[source]
        source: qreflect::Error,
    },

    #[error("{0}")]
    Unsettled(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn engine(module: &'static str) -> impl FnOnce(qreflect::Error) -> CliError {
        move |source| CliError::Engine { module, source }
    }

    pub fn exit_code(&self) -> i32 {
        use qreflect::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Unsettled(_) => 3,
            CliError::Engine { source, .. } => match source {
                E::Unsettled { .. } => 3,
                E::NumericalBlowup { .. } | E::Instability(_) | E::Singular(_) | E::CalibrationFailed { .. } => 4,
                _ => 2,
            },
        }
    }
}

impl From<qreflect::Error> for CliError {
    fn from(e: qreflect::Error) -> Self {
        CliError::Engine {
            module: "engine",
            source: e,
        }
    }
}
