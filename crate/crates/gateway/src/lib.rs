//! Gateway between sensor nodes and the ingest API.
//!
//! Frames are decoded and validated, duplicates suppressed per node, and
//! readings buffered until a batch is due. One batch is outstanding at a
//! time; a failed upload is retried with exponential backoff and the
//! readings stay retained until the server acknowledges them.

pub mod gateway;
pub mod net;
pub mod upstream;

pub use gateway::{
    backoff_delay, AcceptResult, Counters, Gateway, GatewayConfig, RejectReason, UploadOutcome,
};
pub use upstream::{pump, HttpUpstream, PumpStats, UploadError, Upstream};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("no outstanding batch with id {0:?}")]
    UnknownBatch(String),
}
