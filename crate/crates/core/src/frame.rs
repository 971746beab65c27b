//! Binary node frame codec.
//!
//! ```text
//! offset  size  field
//! 0       1     version (0x01)
//! 1       1     node kind (0x01 classroom, 0x02 power meter)
//! 2       2     node id
//! 4       4     sequence number
//! 8       4     timestamp, unix seconds
//! 12      1     record count N (1..=16)
//! 13      3*N   records: metric code (1) + wire value (2, signed for temperature only)
//! 13+3N   1     XOR of every preceding byte
//! ```
//!
//! All multi-byte fields are big-endian.

use crate::error::FrameError;
use crate::metric::Metric;
use crate::topology::NodeKind;

pub const FRAME_VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 13;
pub const RECORD_LEN: usize = 3;
pub const MAX_RECORDS: usize = 16;
pub const MIN_FRAME_LEN: usize = HEADER_LEN + RECORD_LEN + 1;
pub const MAX_FRAME_LEN: usize = HEADER_LEN + RECORD_LEN * MAX_RECORDS + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Record {
    pub metric: Metric,
    pub wire: i32,
}

impl Record {
    pub fn new(metric: Metric, wire: i32) -> Self {
        Record { metric, wire }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeReport {
    pub version: u8,
    pub node_kind: NodeKind,
    pub node_id: u16,
    pub seq: u32,
    pub ts: u32,
    pub records: Vec<Record>,
}

impl NodeReport {
    fn validate(&self) -> Result<(), FrameError> {
        if self.version != FRAME_VERSION {
            return Err(FrameError::Malformed(format!(
                "unsupported version {}",
                self.version
            )));
        }
        if self.records.is_empty() || self.records.len() > MAX_RECORDS {
            return Err(FrameError::Malformed(format!(
                "record count {} outside 1..={MAX_RECORDS}",
                self.records.len()
            )));
        }
        for (i, r) in self.records.iter().enumerate() {
            if self.records[..i].iter().any(|p| p.metric == r.metric) {
                return Err(FrameError::Malformed(format!(
                    "metric {} repeated",
                    r.metric
                )));
            }
            if !r.metric.wire_fits(r.wire) {
                return Err(FrameError::Malformed(format!(
                    "wire value {} does not fit {}",
                    r.wire, r.metric
                )));
            }
        }
        Ok(())
    }
}

pub fn xor_fold(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0, |acc, b| acc ^ b)
}

pub fn encode_frame(report: &NodeReport) -> Result<Vec<u8>, FrameError> {
    report.validate()?;
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * report.records.len() + 1);
    out.push(report.version);
    out.push(report.node_kind.wire_byte());
    out.extend_from_slice(&report.node_id.to_be_bytes());
    out.extend_from_slice(&report.seq.to_be_bytes());
    out.extend_from_slice(&report.ts.to_be_bytes());
    out.push(report.records.len() as u8);
    for r in &report.records {
        out.push(r.metric.code());
        let raw = if r.metric.is_signed() {
            (r.wire as i16).to_be_bytes()
        } else {
            (r.wire as u16).to_be_bytes()
        };
        out.extend_from_slice(&raw);
    }
    out.push(xor_fold(&out));
    Ok(out)
}

/// Decodes one frame. Length and checksum are verified before any record is
/// interpreted; an unknown metric code rejects the whole frame.
pub fn decode_frame(bytes: &[u8]) -> Result<NodeReport, FrameError> {
    if bytes.len() < MIN_FRAME_LEN {
        return Err(FrameError::Truncated {
            len: bytes.len(),
            need: MIN_FRAME_LEN,
        });
    }
    // XOR over the whole frame including the trailer is zero iff the checksum matches.
    if xor_fold(bytes) != 0 {
        return Err(FrameError::Checksum);
    }
    let count = bytes[12] as usize;
    let need = HEADER_LEN + RECORD_LEN * count + 1;
    if bytes.len() < need {
        return Err(FrameError::Truncated {
            len: bytes.len(),
            need,
        });
    }
    if bytes.len() > need {
        return Err(FrameError::Malformed(format!(
            "{} trailing bytes after {count} records",
            bytes.len() - need
        )));
    }
    if count == 0 || count > MAX_RECORDS {
        return Err(FrameError::Malformed(format!(
            "record count {count} outside 1..={MAX_RECORDS}"
        )));
    }
    let version = bytes[0];
    if version != FRAME_VERSION {
        return Err(FrameError::Malformed(format!(
            "unsupported version {version}"
        )));
    }
    let node_kind = NodeKind::from_wire_byte(bytes[1])
        .ok_or_else(|| FrameError::Malformed(format!("unknown node kind 0x{:02x}", bytes[1])))?;
    let node_id = u16::from_be_bytes([bytes[2], bytes[3]]);
    let seq = u32::from_be_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    let ts = u32::from_be_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);

    let mut records = Vec::with_capacity(count);
    for chunk in bytes[HEADER_LEN..need - 1].chunks_exact(RECORD_LEN) {
        let metric = Metric::from_code(chunk[0]).ok_or(FrameError::UnknownMetric(chunk[0]))?;
        let raw = [chunk[1], chunk[2]];
        let wire = if metric.is_signed() {
            i16::from_be_bytes(raw) as i32
        } else {
            u16::from_be_bytes(raw) as i32
        };
        if records.iter().any(|r: &Record| r.metric == metric) {
            return Err(FrameError::Malformed(format!("metric {metric} repeated")));
        }
        records.push(Record { metric, wire });
    }

    Ok(NodeReport {
        version,
        node_kind,
        node_id,
        seq,
        ts,
        records,
    })
}
