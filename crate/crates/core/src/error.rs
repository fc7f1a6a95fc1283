use thiserror::Error;

/// Errors surfaced by the library.
///
/// Variants map one-to-one onto the failure modes of the individual
/// operations; I/O and serialization failures are wrapped so the CLI can
/// report them as data errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsatisfiable-space: {reason} (achieved {achieved} of {requested})")]
    UnsatisfiableSpace {
        reason: String,
        achieved: usize,
        requested: usize,
    },
    #[error("invalid input space: {0}")]
    InvalidSpace(String),
    #[error("invalid test input: {0}")]
    InvalidInput(String),
    #[error("off-map: position ({x:.3}, {y:.3}) is farther than the arm length from every lane")]
    OffMap { x: f64, y: f64 },
    #[error("out-of-range: {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("empty-input: {0}")]
    EmptyInput(&'static str),
    #[error("insufficient-runs: record {input_id} has {runs} runs, {required} required")]
    InsufficientRuns {
        input_id: String,
        runs: usize,
        required: usize,
    },
    #[error("degenerate-minority: minority class has {0} members, at least 2 required")]
    DegenerateMinority(usize),
    #[error("class-too-small: class {label} has {count} members, {folds} folds requested")]
    ClassTooSmall { label: bool, count: usize, folds: usize },
    #[error("single-class: training data contains only one class")]
    SingleClass,
    #[error("schema-mismatch: {0}")]
    SchemaMismatch(String),
    #[error("all-zero-differences: every paired difference is zero")]
    AllZeroDifferences,
    #[error("too few non-zero differences: {0} (at least 5 required)")]
    TooFewPairs(usize),
    #[error("missing-models: {0}")]
    MissingModels(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unsupported schema version {found} in {what} (expected {expected})")]
    SchemaVersion { what: String, found: u32, expected: u32 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Errors caused by how the tool was invoked rather than by the data it read.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidSpace(_))
    }
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
