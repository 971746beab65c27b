use serde::{Deserialize, Serialize};

use crate::metric::Metric;

/// One decoded sample in engineering units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub node_id: u16,
    pub metric: Metric,
    pub value: f64,
    pub ts: u32,
    pub seq: u32,
}

impl Reading {
    /// Identity used for deduplication downstream.
    pub fn key(&self) -> ReadingKey {
        ReadingKey {
            node_id: self.node_id,
            seq: self.seq,
            metric: self.metric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReadingKey {
    pub node_id: u16,
    pub seq: u32,
    pub metric: Metric,
}

/// Gateway-to-cloud transfer unit. Re-sent batches keep their `batch_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadBatch {
    pub gateway_id: String,
    pub batch_id: String,
    pub readings: Vec<Reading>,
}

pub const MAX_BATCH_READINGS: usize = 500;
