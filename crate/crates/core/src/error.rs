use thiserror::Error;

/// Errors produced by the summary store.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("channel count mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("histograms reference different dictionaries and no mapping was supplied")]
    DictionaryMismatch,
    #[error("weight must be non-negative and finite, got {0}")]
    NegativeWeight(f64),
    #[error("budget of {slots} slots cannot cover {levels} active levels")]
    BudgetTooSmall { slots: usize, levels: usize },
    #[error("query range [{t0}, {t1}) extends past the newest ingested index {now}")]
    FutureRange { t0: u64, t1: u64, now: u64 },
    #[error("invalid range [{t0}, {t1})")]
    InvalidRange { t0: u64, t1: u64 },
    #[error("scale-wise variance depth mismatch: {0} vs {1}")]
    DepthMismatch(usize, usize),
    #[error("coefficient series is empty")]
    EmptySeries,
    #[error("compressive transform needs a non-negative input, got {0}")]
    NegativeInput(f64),
    #[error("invalid compression order {0}")]
    InvalidOrder(u32),
    #[error("order {order} exceeds the configured maximum {max}")]
    OrderTooHigh { order: u32, max: u32 },
    #[error("cannot build a distribution model from an empty sample")]
    EmptySample,
    #[error("sample lacks the statistic needed for a {0} model")]
    MissingStatistic(&'static str),
    #[error("matrix is singular after regularization")]
    SingularMatrix,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot build an index over zero leaves")]
    EmptyLeaves,
    #[error("fan-out must be at least 2, got {0}")]
    InvalidFanout(usize),
    #[error("pattern length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("budget cannot be satisfied: {0}")]
    CannotSatisfyBudget(String),
    #[error("unknown sample id {0}")]
    UnknownId(u64),
    #[error("invalid curation rules: {0}")]
    InvalidRules(String),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported container version {0}")]
    VersionUnsupported(u16),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("malformed container: {0}")]
    Malformed(String),
    #[error("invalid request: {0}")]
    BadRequest(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
