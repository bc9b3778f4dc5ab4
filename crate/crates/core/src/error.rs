use std::path::PathBuf;

/// Errors raised across the simulator, predictor and verifier.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("argument {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("reaction term is not of KPP type: {0}")]
    NotKpp(String),

    #[error("no positive front speed: {0}")]
    NoFrontSpeed(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("time step {dt} exceeds the stability bound {bound}")]
    Cfl { dt: f64, bound: f64 },

    #[error("scheme soundness violated: {0}")]
    SchemeSoundness(String),

    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },

    #[error("run is contaminated by the domain boundary (max deviation {deviation:.3e} at t = {t})")]
    Contaminated { t: f64, deviation: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("window guard: {0}")]
    WindowGuard(String),

    #[error("snapshot format: {0}")]
    Format(#[from] FormatError),

    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config validation: {0}")]
    Validation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Distinct failure modes when decoding a snapshot file.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic, not an RDFLD1 snapshot")]
    BadMagic,
    #[error("unsupported mode byte {0}")]
    UnsupportedMode(u8),
    #[error("header decodes only with swapped byte order (foreign-endian file)")]
    ForeignEndian,
    #[error("file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("trailing bytes after payload: expected {expected} bytes, found {found}")]
    TrailingBytes { expected: usize, found: usize },
    #[error("inconsistent header: {0}")]
    Header(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
