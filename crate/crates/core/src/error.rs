use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid bundle matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("searcher index {index} out of range for {n_searchers} searchers")]
    IndexOutOfRange { index: usize, n_searchers: usize },

    #[error("instance too large for exact {what}: {size} exceeds limit {limit}")]
    TooLarge {
        what: &'static str,
        size: u64,
        limit: u64,
    },

    #[error("coalition {inner:?} is not a subset of {outer:?}")]
    NotNested {
        inner: Vec<usize>,
        outer: Vec<usize>,
    },

    #[error("coalitional value is not submodular; the marginal-contribution characterization does not apply")]
    NotSubmodular,

    #[error("block {block} has validator value {value}; VCG payments require a passive proposer (zero validator value on every block)")]
    ActiveValidator { block: usize, value: f64 },

    #[error("allocation is not in the core")]
    NotInCore,

    #[error("payment {payment} of searcher {searcher} is already at its VCG floor {floor}; no profitable misreport exists")]
    AlreadyAtFloor {
        searcher: usize,
        payment: f64,
        floor: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("missing or malformed header: expected `{expected}`")]
    MissingHeader { expected: String },

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
