use std::path::PathBuf;

use limstrain::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<CliError>,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        CliError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// 0 success, 1 i/o, 2 configuration or data, 3 solver, 4 oracle mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::OracleMismatch(_) => 4,
            CliError::Context { source, .. } => source.exit_code(),
            CliError::Core(e) => match e {
                Error::Config(_)
                | Error::Parse { .. }
                | Error::InvalidInput(_)
                | Error::Compatibility { .. }
                | Error::SafetyStrain(_)
                | Error::OutOfRange { .. } => 2,
                Error::Io(_) => 1,
                _ => 3,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::OracleMismatch("x".into()).exit_code(), 4);
        assert_eq!(
            CliError::Core(Error::Solver {
                message: "stall".into(),
                history: vec![1.0]
            })
            .exit_code(),
            3
        );
        assert_eq!(CliError::Core(Error::SafetyStrain("x".into())).exit_code(), 2);
        let nested = CliError::Core(Error::Solver {
            message: "stall".into(),
            history: vec![],
        })
        .context("a = 0.5");
        assert_eq!(nested.exit_code(), 3);
        assert!(nested.to_string().starts_with("a = 0.5: "));
    }
}
