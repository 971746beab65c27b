//! Durable, idempotent telemetry storage: line-JSON append-only segments with
//! an in-memory index, time-series queries, tumbling-window aggregation and
//! daily energy integration.

pub mod ingest;
pub mod query;
mod store;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use ingest::{IngestBatch, IngestReading, IngestResult, RejectReason, Rejection};
pub use query::{AggFn, AggPoint};
pub use store::{scan_segments, DailyEnergy, Store, StoreConfig, Target, DEFAULT_SEGMENT_BYTES};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("store was opened read-only")]
    ReadOnly,
    #[error("corrupt segment {} at byte offset {offset}: {reason}", segment.display())]
    Recovery {
        segment: PathBuf,
        offset: u64,
        reason: String,
    },
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl StoreError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
