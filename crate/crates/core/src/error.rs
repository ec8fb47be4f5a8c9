use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` not found in CSV header")]
    MissingColumn(String),

    #[error("no rows left after dropping rows with missing or non-numeric cells")]
    EmptyAfterFiltering,

    #[error("unparseable CSV header: {0}")]
    UnparseableHeader(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("alphabet size must be at least 2, got {0}")]
    InvalidAlphabet(usize),

    #[error("empty sequence")]
    EmptySequence,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("sequence of length {len} is too short for embedding depth {depth}")]
    SequenceTooShort { len: usize, depth: usize },

    #[error("state space {base}^{width} does not fit in 64 bits")]
    StateSpaceOverflow { base: u64, width: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("tree does not match dataset: {0}")]
    TreeDatasetMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by flags or config values rather than by the data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::MissingColumn(_) | Error::InvalidAlphabet(_)
        )
    }
}
