use thiserror::Error;

/// Invalid arguments or configuration, detected before any state changes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("invalid time window [{t1}, {t2}): start must precede end")]
    EmptyWindow { t1: String, t2: String },
    #[error("horizon of {horizon} s is shorter than the minimum window duration {min} s")]
    HorizonTooShort { horizon: String, min: String },
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: String },
    #[error("device with {cores} cores cannot be split into tracks of {per_track} cores")]
    IndivisibleCores { cores: u32, per_track: u32 },
    #[error("unit bucket count must be 4, got {0}")]
    UnitBuckets(usize),
    #[error("exponential bucket count must be at least 1")]
    NoExponentialBuckets,
    #[error("smoothing factor must lie in (0, 1], got {0}")]
    Alpha(String),
    #[error("{0}")]
    Invalid(String),
}

/// Errors raised by link reservations.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinkError {
    #[error("bucket {0} is outside the link horizon")]
    NoSuchBucket(usize),
    #[error("bucket {index} is full ({capacity} transfers)")]
    BucketFull { index: usize, capacity: usize },
}

/// Errors raised while loading traces, configuration files or run logs.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Param(#[from] ParamError),
}

impl LoadError {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        LoadError::Parse {
            line,
            msg: msg.into(),
        }
    }
}
