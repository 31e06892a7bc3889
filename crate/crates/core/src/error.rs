use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("total coverage is zero; no event probability can be formed")]
    ZeroCoverage,

    #[error("{file}: event {row} at mjd {mjd} precedes mjd {previous}")]
    TimeOrder {
        file: String,
        row: usize,
        mjd: f64,
        previous: f64,
    },

    #[error("schema version mismatch in {file}: expected {expected}, found {found}")]
    SchemaVersion {
        file: String,
        expected: u32,
        found: u32,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },

    #[error("{file}: header invariant violated: {message}")]
    Header { file: String, message: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-parsable error class, one token.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::DegenerateGeometry(_) => "degenerate-geometry",
            Error::InvalidScenario(_) => "invalid-scenario",
            Error::InvalidConfig(_) => "invalid-config",
            Error::ResourceGuard(_) => "resource-guard",
            Error::ZeroCoverage => "zero-coverage",
            Error::TimeOrder { .. } => "time-order",
            Error::SchemaVersion { .. } => "schema-mismatch",
            Error::Parse { .. } => "parse",
            Error::Header { .. } => "header",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
