use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// A scenario that parses but cannot run, such as a missing seed or a
    /// demand naming an unknown host.
    #[error("{0}")]
    Scenario(String),
    #[error("report schemas differ: {0}")]
    Schema(String),
    #[error("invariant `{property}` violated: {detail}")]
    Invariant { property: String, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        CliError::Parse { line, msg: msg.into() }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit status: 1 usage, 2 parse, 3 invariant violation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Parse { .. } | CliError::Scenario(_) | CliError::Schema(_) => 2,
            CliError::Invariant { .. } => 3,
        }
    }
}

impl From<vlantree::Error> for CliError {
    fn from(e: vlantree::Error) -> Self {
        match e {
            vlantree::Error::Parse { line, msg } => CliError::Parse { line, msg },
            other => CliError::Scenario(other.to_string()),
        }
    }
}
