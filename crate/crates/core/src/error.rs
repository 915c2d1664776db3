use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is not strongly connected")]
    NotIrreducible,

    #[error("point kinds or dimensions do not match: {0}")]
    KindMismatch(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("semantic error: {0}")]
    Semantic(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sampler found no point of vertex set {vertex} within budget {budget}")]
    SamplerExhausted { vertex: usize, budget: usize },

    #[error("unknown builtin system `{0}`")]
    UnknownBuiltin(String),

    #[error("invalid stochastic matrix: {0}")]
    InvalidStochasticMatrix(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("system declares no contraction rate")]
    MissingRate,

    #[error("system has no registered modulus envelope for its probabilities")]
    MissingModulus,

    #[error("point lies in no vertex set")]
    OrphanPoint,

    #[error("enumeration needs {needed} terms, cap is {cap}")]
    CapExceeded { needed: u128, cap: u128 },

    #[error("inadmissible word: {0}")]
    InadmissibleWord(String),

    #[error("symbol {0} is outside the binary alphabet")]
    WrongAlphabet(usize),

    #[error("points lie in different vertex sets ({0} and {1})")]
    VertexMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;
