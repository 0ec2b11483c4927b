use std::fmt;
use std::path::PathBuf;

use batchpic_core::Error as CoreError;

/// Stage of a cycle in which a failure happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Particles,
    FieldSolve,
    DivergenceClean,
    Sort,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Particles => "particle phase",
            Phase::FieldSolve => "field solve",
            Phase::DivergenceClean => "divergence cleaning",
            Phase::Sort => "particle sort",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{phase}: {source}")]
    Phase {
        phase: Phase,
        #[source]
        source: CoreError,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),

    #[error("usage: {0}")]
    Usage(String),
}

/// Process exit status for each error category.
pub mod exit {
    pub const USAGE: u8 = 2;
    pub const CONFIG: u8 = 3;
    pub const IO: u8 = 4;
    pub const NUMERICAL: u8 = 5;
    pub const INTEGRITY: u8 = 6;
}

impl EngineError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        EngineError::Core(CoreError::config(key, message))
    }

    pub fn phase(phase: Phase, source: CoreError) -> Self {
        EngineError::Phase { phase, source }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EngineError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        let core = match self {
            EngineError::Core(e) | EngineError::Phase { source: e, .. } => e,
            EngineError::Parse { .. } => return exit::CONFIG,
            EngineError::Io { .. } => return exit::IO,
            EngineError::Format(_) => return exit::IO,
            EngineError::Usage(_) => return exit::USAGE,
        };
        match core {
            CoreError::Config { .. } => exit::CONFIG,
            CoreError::Breakdown { .. } | CoreError::NotConverged { .. } => exit::NUMERICAL,
            CoreError::Shape { .. } => exit::IO,
            CoreError::Index { .. } | CoreError::Domain { .. } | CoreError::Integrity(_) => {
                exit::INTEGRITY
            }
        }
    }
}
