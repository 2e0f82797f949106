use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{msg} at line {line}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("polytope is unbounded in direction {direction}")]
    Unbounded { direction: String },

    #[error("polytope is infeasible")]
    Infeasible,

    #[error("polytope contains no lattice points (bounding rectangle is empty)")]
    NoLatticePoints,

    #[error("degenerate body: {0}")]
    DegenerateBody(String),

    #[error("LP iteration cap of {limit} pivots exceeded")]
    LpIterationCap { limit: usize },

    #[error(
        "rejection cap exceeded: {accepted}/{requested} samples accepted after {attempts} attempts \
         (count indistinguishable from zero)"
    )]
    RejectionCap {
        attempts: u64,
        accepted: usize,
        requested: usize,
    },

    #[error("disturb cap exceeded: {rounds} disturb rounds at chain level {level}")]
    DisturbCap { level: usize, rounds: usize },

    #[error("chain length cap exceeded: {length} levels (cap {cap})")]
    ChainTooLong { length: usize, cap: usize },

    #[error("round cap exceeded: stopping criterion not met after {rounds} rounds")]
    MaxRounds { rounds: usize },

    #[error("oracle box of {box_size} points exceeds limit {limit}")]
    OracleLimit { box_size: String, limit: String },

    #[error("generator gave up after {tries} infeasible draws")]
    GeneratorExhausted { tries: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for input problems, 3 for resource caps.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::LpIterationCap { .. }
            | Error::RejectionCap { .. }
            | Error::DisturbCap { .. }
            | Error::ChainTooLong { .. }
            | Error::MaxRounds { .. }
            | Error::OracleLimit { .. }
            | Error::GeneratorExhausted { .. } => 3,
            Error::InvalidConfig(_) | Error::Precondition(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
