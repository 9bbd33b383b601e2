use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input: no points")]
    EmptyInput,

    #[error("duplicate points: #{0} and #{1} have identical coordinates")]
    DuplicatePoints(usize, usize),

    #[error("invalid point set: {0}")]
    InvalidPointSet(String),

    #[error("posterior domain error: volume {volume} is not above n - 1 for n = {n}")]
    Domain { n: u64, volume: f64 },

    #[error(
        "quantization check failed: {} cell(s) below one quantum (smallest {min_volume_quanta}); \
         try a quantum of at most {suggested_quantum:?}",
        failing.len()
    )]
    Quantization {
        failing: Vec<usize>,
        min_volume_quanta: f64,
        suggested_quantum: Vec<f64>,
    },

    #[error("invalid merge: blocks {0} and {1} are not live and adjacent")]
    InvalidMerge(usize, usize),

    #[error("query point lies outside the observation bounds")]
    OutOfBounds,

    #[error("exhaustive search is limited to {max} cells, got {got}")]
    TooLarge { max: usize, got: usize },

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the posterior domain or quantization rather
    /// than by malformed input.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::Quantization { .. }
                | Error::InvalidMerge(..)
                | Error::TooLarge { .. }
        )
    }
}
