use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} is outside the representable range (|x| < 2^{int_bits})")]
    Range { value: f64, int_bits: u32 },

    #[error("parameter out of range in {location}: {value}")]
    ParameterRange { location: String, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("preprocessing underflow: {kind} (requested {requested}, available {available})")]
    PreprocessingUnderflow {
        kind: String,
        requested: u64,
        available: u64,
    },

    #[error("incompatible configuration: local hash {local:#010x}, peer {peer} sent {remote:#010x}")]
    IncompatibleConfig { local: u32, remote: u32, peer: usize },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("timed out waiting for party {peer}")]
    Timeout { peer: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Conventional process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Range { .. }
            | Error::ParameterRange { .. }
            | Error::Config(_)
            | Error::Usage(_)
            | Error::Shape(_)
            | Error::Schema(_) => 2,
            Error::Protocol(_)
            | Error::Integrity(_)
            | Error::IncompatibleConfig { .. }
            | Error::Transport(_)
            | Error::Timeout { .. } => 3,
            Error::PreprocessingUnderflow { .. } => 4,
            Error::Io(_) => 1,
        }
    }
}
