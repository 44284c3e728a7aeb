use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group spec `{0}`")]
    InvalidGroupSpec(String),
    #[error("group of order {order} exceeds the enumeration bound {bound}")]
    EnumerationInfeasible { order: usize, bound: usize },
    #[error("invalid subgroup: {0}")]
    InvalidSubgroup(String),
    #[error("subgroup nesting violated: K is not contained in H")]
    NestingViolation,
    #[error("pairwise Bhattacharyya parameter needs two distinct inputs, got {0} twice")]
    InvalidPair(usize),
    #[error("row {row} of the transition table sums to {sum}")]
    NotStochastic { row: usize, sum: f64 },
    #[error("synthesized table needs {cells} cells, bound is {bound}")]
    SynthesisTooLarge { cells: usize, bound: usize },
    #[error("alphabet mismatch: expected {expected}, found {found}")]
    AlphabetMismatch { expected: usize, found: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("no probability mass left at index {index}: evidence is inconsistent")]
    InconsistentEvidence { index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("construction hash mismatch: message was produced for a different code")]
    HashMismatch,
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
