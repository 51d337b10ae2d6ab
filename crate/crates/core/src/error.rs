use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid network dimensions: {0}")]
    InvalidDims(String),
    #[error("dataset has no samples")]
    EmptyDataset,
    #[error("non-finite value in {what} at sample {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("channel {channel} of {signal} has zero variance")]
    ZeroVariance { signal: &'static str, channel: usize },
    #[error("too few samples: need at least {required}, have {available}")]
    TooShort { required: usize, available: usize },
    #[error("range {start}..{end} is empty or out of bounds for {len} samples")]
    RangeOutOfBounds { start: usize, end: usize, len: usize },
    #[error("ranges {first:?} and {second:?} overlap")]
    OverlappingRanges {
        first: (usize, usize),
        second: (usize, usize),
    },
    #[error("unstable linear system: state matrix spectral radius is not below 1")]
    Unstable,
    #[error("invalid system description: {0}")]
    InvalidSystem(String),
    #[error("tape was not produced by this network in its current state")]
    StaleTape,
    #[error("section start {start} outside the valid range [{min}, {max}]")]
    SectionOutOfRange { start: usize, min: usize, max: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch index {index} out of range for {count} sections")]
    BatchIndex { index: usize, count: usize },
    #[error("batch size {batch} exceeds the {available} available sections")]
    BatchTooLarge { batch: usize, available: usize },
    #[error("output standard deviation is zero")]
    ZeroSigma,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("every epoch produced non-finite losses")]
    Diverged,
}
