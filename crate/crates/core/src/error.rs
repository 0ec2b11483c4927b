use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("node index ({i}, {j}, {k}) outside 0..={nx} x 0..={ny} x 0..={nz}")]
    Index {
        i: usize,
        j: usize,
        k: usize,
        nx: usize,
        ny: usize,
        nz: usize,
    },

    /// A position that should be inside the box is not; indicates a boundary
    /// handling bug upstream.
    #[error("position ({x}, {y}, {z}) outside the domain")]
    Domain { x: f64, y: f64, z: f64 },

    /// A particle left the box by a full domain length or more in one step.
    #[error("particle integrity: {0}")]
    Integrity(String),

    #[error("configuration: {key}: {message}")]
    Config { key: String, message: String },

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("numerical breakdown in {solver}: {message}")]
    Breakdown {
        solver: &'static str,
        message: String,
    },

    #[error(
        "{solver} did not converge: relative residual {residual:e} after {iterations} iterations"
    )]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
