use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("list is empty")]
    EmptyList,
    #[error("item {item:?}: embedding has length {found}, expected {expected}")]
    DimensionMismatch {
        item: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate item id {0:?}")]
    DuplicateId(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("dimension {dim} is not divisible by head count {heads}")]
    IndivisibleHeads { dim: usize, heads: usize },
    #[error("label {0} out of range for exponential gain")]
    LabelOutOfRange(f64),
    #[error("rank must be >= 1, got {0}")]
    InvalidRank(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("no pair with distinct labels")]
    NoValidPairs,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("forward cache does not match: {0}")]
    CacheMismatch(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("list {0:?} has no query or item text")]
    MissingText(String),
    #[error("{groups} groups cannot fill {folds} folds")]
    TooFewGroups { groups: usize, folds: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch} on list {group:?}")]
    NonFiniteLoss { epoch: usize, group: String },
}
