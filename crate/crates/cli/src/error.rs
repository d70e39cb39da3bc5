use std::fmt;
use std::path::Path;

/// Process exit status classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Internal = 1,
    Input = 2,
    Capability = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn new(stage: &'static str, kind: ExitKind, message: impl Into<String>) -> Self {
        Self {
            stage,
            kind,
            message: message.into(),
        }
    }

    pub fn input(stage: &'static str, message: impl Into<String>) -> Self {
        Self::new(stage, ExitKind::Input, message)
    }

    pub fn dependency(stage: &'static str, message: impl Into<String>) -> Self {
        Self::new(stage, ExitKind::Input, format!("missing dependency: {}", message.into()))
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }

    /// Wraps a core error raised while handling `path`.
    pub fn at_path(stage: &'static str, path: &Path, err: atp_core::Error) -> Self {
        let mut e = Self::from_core(stage, err);
        e.message = format!("{}: {}", path.display(), e.message);
        e
    }

    pub fn from_core(stage: &'static str, err: atp_core::Error) -> Self {
        use atp_core::Error as E;
        let kind = match &err {
            E::Parse { .. } | E::Validation(_) | E::InvalidState(_) | E::DegenerateDegree { .. } => {
                ExitKind::Input
            }
            E::Capability(_) => ExitKind::Capability,
            E::Io(io) if io.kind() == std::io::ErrorKind::NotFound => ExitKind::Input,
            E::Io(_) | E::Convergence { .. } | E::Numeric { .. } | E::BoundViolation { .. } => {
                ExitKind::Internal
            }
        };
        Self::new(stage, kind, err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
