use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("empty vertex subset")]
    EmptySubset,

    #[error("vertex {0} is out of range")]
    VertexOutOfRange(usize),

    #[error("vertex subset does not induce a connected subgraph")]
    Disconnected,

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("prior covariance is singular even after jitter: {0}")]
    SingularPrior(String),

    #[error("non-finite measurement {value} at vertex {vertex}")]
    NonFiniteSample { vertex: usize, value: f64 },

    #[error(
        "sampling plan exceeded cap of {cap} samples; max variance reached {reached:.3e} \
         against threshold {threshold:.3e} (noise-limited floor after k samples at one vertex is \
         sigma^2/k = {noise_variance:.3e}/k)"
    )]
    PlanCapExceeded {
        cap: usize,
        reached: f64,
        threshold: f64,
        noise_variance: f64,
    },

    #[error("exhaustive enumeration of {vertices}^{n} designs exceeds cap {cap}; use a smaller instance")]
    EnumerationCap { vertices: usize, n: usize, cap: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("parts {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),

    #[error("agent {agent} at vertex {vertex} is outside its part")]
    GeneratorOutsidePart { agent: usize, vertex: usize },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("explicit epoch schedule exhausted at epoch {0}")]
    EpochScheduleExhausted(usize),

    #[error("non-monotone record index: {t} after {last}")]
    NonMonotoneTime { t: u64, last: u64 },

    #[error("negative instantaneous regret {0:e} beyond numerical slack")]
    NegativeRegret(f64),

    #[error("config error(s):\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. })
    }
}
