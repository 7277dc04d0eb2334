use std::fmt;

/// A failed command and its process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Endpoint(String),
    Evaluation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Endpoint(_) => 4,
            CliError::Evaluation(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            CliError::Usage(m) => ("usage error", m),
            CliError::Io(m) => ("i/o error", m),
            CliError::Endpoint(m) => ("policy endpoint error", m),
            CliError::Evaluation(m) => ("evaluation failed", m),
        };
        write!(f, "{kind}: {msg}")
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

impl From<ahd_core::instancegen::DatasetError> for CliError {
    fn from(e: ahd_core::instancegen::DatasetError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ahd_core::scoring::RefsError> for CliError {
    fn from(e: ahd_core::scoring::RefsError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ahd_core::session::SessionError> for CliError {
    fn from(e: ahd_core::session::SessionError) -> Self {
        use ahd_core::session::SessionError as S;
        match e {
            S::Io { .. } | S::Malformed { .. } | S::UnknownSession(_) => CliError::Io(e.to_string()),
            S::DatasetMismatch { .. } | S::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Evaluation(e.to_string()),
        }
    }
}

impl From<ahd_core::agent::AgentError> for CliError {
    fn from(e: ahd_core::agent::AgentError) -> Self {
        use ahd_core::agent::{AgentError as A, PolicyError as P};
        match e {
            A::Policy(P::Config(m)) => CliError::Usage(m),
            A::Policy(p) => CliError::Endpoint(p.to_string()),
            A::Session(s) => s.into(),
            A::Config(m) => CliError::Usage(m),
            other => CliError::Evaluation(other.to_string()),
        }
    }
}

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
