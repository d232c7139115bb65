use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: atomarray::Error,
    },

    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn core(context: impl Into<String>) -> impl FnOnce(atomarray::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }

    /// 2 for bad inputs, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        use atomarray::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core { source, .. } if source.is_numerical() => 3,
            CliError::Core { source, .. } => match source {
                E::InvalidParameter(_)
                | E::Domain(_)
                | E::Range(_)
                | E::Overlap { .. }
                | E::Parse(_) => 2,
                _ => 1,
            },
            CliError::Output { .. } => 1,
        }
    }
}
