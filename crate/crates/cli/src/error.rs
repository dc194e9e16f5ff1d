use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or malformed input files.
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Lib(#[from] cubeporos::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Lib(e) if is_budget(e) => ExitCode::from(3),
            CliError::Io(_) => ExitCode::from(1),
            _ => ExitCode::from(2),
        }
    }
}

/// Failures of the mathematics at the chosen resolution rather than of the
/// input.
pub fn is_budget(e: &cubeporos::Error) -> bool {
    matches!(
        e,
        cubeporos::Error::PorosityFailure(_) | cubeporos::Error::UnresolvedMeasure(_)
    )
}
