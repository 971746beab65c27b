use thiserror::Error;

use crate::metric::Metric;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{metric} value {value} outside [{min}, {max}]")]
pub struct RangeError {
    pub metric: Metric,
    pub value: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame truncated: {len} bytes, need {need}")]
    Truncated { len: usize, need: usize },
    #[error("checksum mismatch")]
    Checksum,
    #[error("unknown metric code 0x{0:02x}")]
    UnknownMetric(u8),
    #[error("malformed frame: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}
