use gaia_core::{Metric, Reading, UploadBatch};
use serde::{Deserialize, Serialize};

/// Ingest request body as it arrives over HTTP. Fields are loosely typed so a
/// bad reading can be rejected on its own instead of failing the whole batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestBatch {
    pub gateway_id: String,
    pub batch_id: String,
    pub readings: Vec<IngestReading>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReading {
    pub node_id: i64,
    pub metric: String,
    pub value: f64,
    pub ts: i64,
    pub seq: i64,
}

impl From<&Reading> for IngestReading {
    fn from(r: &Reading) -> Self {
        IngestReading {
            node_id: r.node_id as i64,
            metric: r.metric.name().to_string(),
            value: r.value,
            ts: r.ts as i64,
            seq: r.seq as i64,
        }
    }
}

impl From<&UploadBatch> for IngestBatch {
    fn from(b: &UploadBatch) -> Self {
        IngestBatch {
            gateway_id: b.gateway_id.clone(),
            batch_id: b.batch_id.clone(),
            readings: b.readings.iter().map(IngestReading::from).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    UnknownMetric,
    OutOfRange,
    InvalidNodeId,
    InvalidTs,
    InvalidSeq,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestResult {
    pub accepted: usize,
    pub duplicates: usize,
    pub rejected: Vec<Rejection>,
}

impl IngestResult {
    pub fn total(&self) -> usize {
        self.accepted + self.duplicates + self.rejected.len()
    }
}

impl IngestReading {
    pub(crate) fn validate(&self) -> Result<Reading, RejectReason> {
        let metric: Metric = self
            .metric
            .parse()
            .map_err(|_| RejectReason::UnknownMetric)?;
        let node_id = u16::try_from(self.node_id).map_err(|_| RejectReason::InvalidNodeId)?;
        let ts = u32::try_from(self.ts).map_err(|_| RejectReason::InvalidTs)?;
        let seq = u32::try_from(self.seq).map_err(|_| RejectReason::InvalidSeq)?;
        if !metric.contains(self.value) {
            return Err(RejectReason::OutOfRange);
        }
        Ok(Reading {
            node_id,
            metric,
            value: self.value,
            ts,
            seq,
        })
    }
}
