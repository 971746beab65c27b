use std::collections::{HashMap, HashSet, VecDeque};

use gaia_core::{decode_frame, FrameError, Reading, UploadBatch};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::ProtocolError;

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub gateway_id: String,
    /// Unbatched readings held before the oldest is dropped.
    pub buffer_capacity: usize,
    /// Most recent seqs remembered per node for duplicate suppression.
    pub seen_window: usize,
    pub batch_size: usize,
    /// A batch is cut once the oldest buffered reading has waited this long.
    pub max_age_s: u64,
    pub backoff_cap_s: u64,
    pub max_future_skew_s: u64,
    pub max_past_skew_s: u64,
}

impl GatewayConfig {
    pub fn new(gateway_id: impl Into<String>) -> Self {
        GatewayConfig {
            gateway_id: gateway_id.into(),
            buffer_capacity: 10_000,
            seen_window: 4096,
            batch_size: gaia_core::reading::MAX_BATCH_READINGS,
            max_age_s: 30,
            backoff_cap_s: 60,
            max_future_skew_s: 300,
            max_past_skew_s: 7 * 86_400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Truncated,
    Checksum,
    UnknownMetric,
    Malformed,
    ClockSkew,
    Duplicate,
    Range,
}

impl RejectReason {
    fn from_frame_error(e: &FrameError) -> Self {
        match e {
            FrameError::Truncated { .. } => RejectReason::Truncated,
            FrameError::Checksum => RejectReason::Checksum,
            FrameError::UnknownMetric(_) => RejectReason::UnknownMetric,
            FrameError::Malformed(_) => RejectReason::Malformed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptResult {
    Accepted { readings: usize },
    Rejected(RejectReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UploadOutcome {
    Success,
    Failure,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub frames_accepted: u64,
    pub readings_buffered: u64,
    pub rejected: HashMap<RejectReason, u64>,
    pub overflow_dropped: u64,
    pub batches_cut: u64,
    pub batches_acked: u64,
    pub upload_failures: u64,
}

impl Counters {
    pub fn rejected(&self, reason: RejectReason) -> u64 {
        self.rejected.get(&reason).copied().unwrap_or(0)
    }
}

#[derive(Debug, Default)]
struct SeenWindow {
    order: VecDeque<u32>,
    set: HashSet<u32>,
}

impl SeenWindow {
    fn contains(&self, seq: u32) -> bool {
        self.set.contains(&seq)
    }

    fn insert(&mut self, seq: u32, cap: usize) {
        if self.set.insert(seq) {
            self.order.push_back(seq);
            while self.order.len() > cap {
                let old = self.order.pop_front().expect("non-empty");
                self.set.remove(&old);
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Buffered {
    reading: Reading,
    enqueued_at: u64,
}

#[derive(Debug)]
struct InFlight {
    batch: UploadBatch,
    failures: u32,
    /// `Some` after a failure: the batch may be re-sent from this time on.
    retry_at: Option<u64>,
}

#[derive(Debug, Default)]
struct Inner {
    pending: VecDeque<Buffered>,
    seen: HashMap<u16, SeenWindow>,
    in_flight: Option<InFlight>,
    next_batch: u64,
    counters: Counters,
}

impl Inner {
    fn reject(&mut self, reason: RejectReason) -> AcceptResult {
        *self.counters.rejected.entry(reason).or_default() += 1;
        AcceptResult::Rejected(reason)
    }
}

/// Exponential retry delay after `failures` consecutive failed uploads:
/// 1 s with none, then 2, 4, 8, ... capped at `cap_s`.
pub fn backoff_delay(failures: u32, cap_s: u64) -> u64 {
    1u64.checked_shl(failures).unwrap_or(u64::MAX).min(cap_s)
}

/// Store-and-forward gateway state.
///
/// `accept_frame` may be called from many connections at once; buffer
/// mutation, `flush` and `handle_upload_result` serialize on one lock.
/// At most one batch is outstanding at a time, so upload order follows
/// buffer order.
#[derive(Debug)]
pub struct Gateway {
    config: GatewayConfig,
    inner: Mutex<Inner>,
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Self {
        Gateway {
            config,
            inner: Mutex::new(Inner::default()),
        }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn accept_frame(&self, bytes: &[u8], now: u64) -> AcceptResult {
        let decoded = decode_frame(bytes);
        let report = match decoded {
            Ok(r) => r,
            Err(e) => return self.inner.lock().reject(RejectReason::from_frame_error(&e)),
        };
        let ts = report.ts as u64;
        let skewed = ts > now.saturating_add(self.config.max_future_skew_s)
            || ts < now.saturating_sub(self.config.max_past_skew_s);
        let readings: Result<Vec<Reading>, _> = report
            .records
            .iter()
            .map(|r| {
                r.metric.from_wire(r.wire).map(|value| Reading {
                    node_id: report.node_id,
                    metric: r.metric,
                    value,
                    ts: report.ts,
                    seq: report.seq,
                })
            })
            .collect();

        let mut inner = self.inner.lock();
        if skewed {
            return inner.reject(RejectReason::ClockSkew);
        }
        let Ok(readings) = readings else {
            return inner.reject(RejectReason::Range);
        };
        let window = inner.seen.entry(report.node_id).or_default();
        if window.contains(report.seq) {
            return inner.reject(RejectReason::Duplicate);
        }
        window.insert(report.seq, self.config.seen_window);

        for reading in &readings {
            if inner.pending.len() >= self.config.buffer_capacity {
                inner.pending.pop_front();
                inner.counters.overflow_dropped += 1;
            }
            inner.pending.push_back(Buffered {
                reading: *reading,
                enqueued_at: now,
            });
        }
        inner.counters.frames_accepted += 1;
        inner.counters.readings_buffered += readings.len() as u64;
        AcceptResult::Accepted {
            readings: readings.len(),
        }
    }

    /// Returns the next batch to upload, if one is due: a retry whose backoff
    /// has elapsed, or a new batch when the buffer is full enough or old enough.
    pub fn flush(&self, now: u64) -> Option<UploadBatch> {
        self.flush_inner(now, false)
    }

    /// Like [`flush`](Self::flush) but cuts a batch from whatever is buffered,
    /// ignoring the size and age triggers. Backoff still applies.
    pub fn drain(&self, now: u64) -> Option<UploadBatch> {
        self.flush_inner(now, true)
    }

    fn flush_inner(&self, now: u64, force: bool) -> Option<UploadBatch> {
        let mut inner = self.inner.lock();
        if let Some(flight) = inner.in_flight.as_mut() {
            return match flight.retry_at {
                Some(at) if now >= at => {
                    flight.retry_at = None;
                    Some(flight.batch.clone())
                }
                _ => None,
            };
        }
        let oldest = inner.pending.front()?.enqueued_at;
        let due = force
            || inner.pending.len() >= self.config.batch_size
            || now.saturating_sub(oldest) >= self.config.max_age_s;
        if !due {
            return None;
        }
        let take = inner.pending.len().min(self.config.batch_size);
        let mut readings: Vec<Reading> = inner.pending.drain(..take).map(|b| b.reading).collect();
        // keep each node's readings in seq order even if frames arrived out of order
        readings.sort_by_key(|r| (r.node_id, r.seq));
        inner.next_batch += 1;
        let batch = UploadBatch {
            gateway_id: self.config.gateway_id.clone(),
            batch_id: format!("{}-{:08}", self.config.gateway_id, inner.next_batch),
            readings,
        };
        inner.counters.batches_cut += 1;
        inner.in_flight = Some(InFlight {
            batch: batch.clone(),
            failures: 0,
            retry_at: None,
        });
        Some(batch)
    }

    pub fn handle_upload_result(
        &self,
        batch_id: &str,
        outcome: UploadOutcome,
        now: u64,
    ) -> Result<(), ProtocolError> {
        let mut inner = self.inner.lock();
        let flight = match inner.in_flight.as_mut() {
            Some(f) if f.batch.batch_id == batch_id && f.retry_at.is_none() => f,
            _ => return Err(ProtocolError::UnknownBatch(batch_id.to_string())),
        };
        match outcome {
            UploadOutcome::Success => {
                inner.in_flight = None;
                inner.counters.batches_acked += 1;
            }
            UploadOutcome::Failure => {
                flight.failures += 1;
                flight.retry_at =
                    Some(now + backoff_delay(flight.failures, self.config.backoff_cap_s));
                inner.counters.upload_failures += 1;
            }
        }
        Ok(())
    }

    /// Delay the outstanding batch will wait after its most recent failure.
    pub fn current_retry_delay(&self) -> Option<u64> {
        let inner = self.inner.lock();
        let f = inner.in_flight.as_ref()?;
        f.retry_at
            .map(|_| backoff_delay(f.failures, self.config.backoff_cap_s))
    }

    pub fn next_retry_at(&self) -> Option<u64> {
        self.inner
            .lock()
            .in_flight
            .as_ref()
            .and_then(|f| f.retry_at)
    }

    /// Readings not yet acknowledged: buffered plus the outstanding batch.
    pub fn retained(&self) -> usize {
        let inner = self.inner.lock();
        inner.pending.len()
            + inner
                .in_flight
                .as_ref()
                .map_or(0, |f| f.batch.readings.len())
    }

    pub fn pending(&self) -> usize {
        self.inner.lock().pending.len()
    }

    pub fn counters(&self) -> Counters {
        self.inner.lock().counters.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gaia_core::frame::{encode_frame, NodeReport, Record};
    use gaia_core::{Metric, NodeKind};

    const NOW: u64 = 1_600_000_000;

    fn frame(node_id: u16, seq: u32, ts: u32) -> Vec<u8> {
        encode_frame(&NodeReport {
            version: 1,
            node_kind: NodeKind::Classroom,
            node_id,
            seq,
            ts,
            records: vec![
                Record::new(Metric::Temperature, 2500),
                Record::new(Metric::Humidity, 4000),
            ],
        })
        .unwrap()
    }

    fn gw() -> Gateway {
        Gateway::new(GatewayConfig::new("gw1"))
    }

    #[test]
    fn accept_then_duplicate() {
        let g = gw();
        let f = frame(7, 1, NOW as u32);
        assert_eq!(
            g.accept_frame(&f, NOW),
            AcceptResult::Accepted { readings: 2 }
        );
        assert_eq!(g.pending(), 2);
        assert_eq!(
            g.accept_frame(&f, NOW),
            AcceptResult::Rejected(RejectReason::Duplicate)
        );
        assert_eq!(g.pending(), 2);
        assert_eq!(g.counters().rejected(RejectReason::Duplicate), 1);
    }

    #[test]
    fn clock_skew_bounds() {
        let g = gw();
        assert!(matches!(
            g.accept_frame(&frame(1, 1, (NOW + 300) as u32), NOW),
            AcceptResult::Accepted { .. }
        ));
        assert_eq!(
            g.accept_frame(&frame(1, 2, (NOW + 301) as u32), NOW),
            AcceptResult::Rejected(RejectReason::ClockSkew)
        );
        let week = 7 * 86_400;
        assert!(matches!(
            g.accept_frame(&frame(1, 3, (NOW - week) as u32), NOW),
            AcceptResult::Accepted { .. }
        ));
        assert_eq!(
            g.accept_frame(&frame(1, 4, (NOW - week - 1) as u32), NOW),
            AcceptResult::Rejected(RejectReason::ClockSkew)
        );
        // a skewed frame does not consume its seq
        assert!(matches!(
            g.accept_frame(&frame(1, 2, NOW as u32), NOW),
            AcceptResult::Accepted { .. }
        ));
    }

    #[test]
    fn corrupt_and_truncated_counted() {
        let g = gw();
        let mut f = frame(1, 1, NOW as u32);
        f[5] ^= 0x10;
        assert_eq!(
            g.accept_frame(&f, NOW),
            AcceptResult::Rejected(RejectReason::Checksum)
        );
        assert_eq!(
            g.accept_frame(&f[..4], NOW),
            AcceptResult::Rejected(RejectReason::Truncated)
        );
        let c = g.counters();
        assert_eq!(c.rejected(RejectReason::Checksum), 1);
        assert_eq!(c.rejected(RejectReason::Truncated), 1);
        assert_eq!(g.pending(), 0);
    }

    #[test]
    fn out_of_range_wire_value_rejected() {
        let g = gw();
        let f = encode_frame(&NodeReport {
            version: 1,
            node_kind: NodeKind::Classroom,
            node_id: 1,
            seq: 1,
            ts: NOW as u32,
            records: vec![Record::new(Metric::Humidity, 10_001)],
        })
        .unwrap();
        assert_eq!(
            g.accept_frame(&f, NOW),
            AcceptResult::Rejected(RejectReason::Range)
        );
    }

    #[test]
    fn size_trigger() {
        let g = gw();
        for seq in 1..=250 {
            g.accept_frame(&frame(1, seq, NOW as u32), NOW);
        }
        let b = g.flush(NOW).unwrap();
        assert_eq!(b.readings.len(), 500);
        assert_eq!(b.batch_id, "gw1-00000001");
        assert_eq!(g.retained(), 500);
    }

    #[test]
    fn age_trigger() {
        let g = gw();
        g.accept_frame(&frame(1, 1, NOW as u32), NOW);
        g.accept_frame(&frame(2, 1, NOW as u32), NOW + 10);
        assert_eq!(g.flush(NOW + 5), None);
        let b = g.flush(NOW + 31).unwrap();
        assert_eq!(b.readings.len(), 4);
    }

    #[test]
    fn three_buffered_age_trigger() {
        let g = gw();
        let f = encode_frame(&NodeReport {
            version: 1,
            node_kind: NodeKind::Classroom,
            node_id: 3,
            seq: 1,
            ts: NOW as u32,
            records: vec![
                Record::new(Metric::Temperature, 2100),
                Record::new(Metric::Humidity, 4000),
                Record::new(Metric::Noise, 300),
            ],
        })
        .unwrap();
        g.accept_frame(&f, NOW);
        assert_eq!(g.flush(NOW + 5), None);
        assert_eq!(g.flush(NOW + 31).unwrap().readings.len(), 3);
    }

    #[test]
    fn success_releases_and_failure_backs_off() {
        let g = gw();
        g.accept_frame(&frame(1, 1, NOW as u32), NOW);
        let b = g.drain(NOW).unwrap();
        // outstanding batch blocks new ones
        g.accept_frame(&frame(1, 2, NOW as u32), NOW);
        assert_eq!(g.drain(NOW), None);

        g.handle_upload_result(&b.batch_id, UploadOutcome::Failure, NOW)
            .unwrap();
        assert_eq!(g.current_retry_delay(), Some(2));
        assert_eq!(g.flush(NOW + 1), None);
        let again = g.flush(NOW + 2).unwrap();
        assert_eq!(again, b);
        g.handle_upload_result(&b.batch_id, UploadOutcome::Failure, NOW + 2)
            .unwrap();
        assert_eq!(g.current_retry_delay(), Some(4));
        assert_eq!(g.next_retry_at(), Some(NOW + 6));

        let again = g.flush(NOW + 6).unwrap();
        assert_eq!(again.batch_id, b.batch_id);
        g.handle_upload_result(&b.batch_id, UploadOutcome::Success, NOW + 6)
            .unwrap();
        assert_eq!(g.retained(), 2);
        let next = g.drain(NOW + 6).unwrap();
        assert_eq!(next.batch_id, "gw1-00000002");
    }

    #[test]
    fn backoff_sequence_caps_at_sixty() {
        let delays: Vec<u64> = (0..9).map(|n| backoff_delay(n, 60)).collect();
        assert_eq!(delays, [1, 2, 4, 8, 16, 32, 60, 60, 60]);
        assert_eq!(backoff_delay(200, 60), 60);
    }

    #[test]
    fn unknown_batch_is_protocol_error() {
        let g = gw();
        assert!(g
            .handle_upload_result("nope", UploadOutcome::Success, NOW)
            .is_err());
        g.accept_frame(&frame(1, 1, NOW as u32), NOW);
        let b = g.drain(NOW).unwrap();
        g.handle_upload_result(&b.batch_id, UploadOutcome::Success, NOW)
            .unwrap();
        // already acknowledged
        assert!(g
            .handle_upload_result(&b.batch_id, UploadOutcome::Success, NOW)
            .is_err());
    }

    #[test]
    fn overflow_drops_oldest() {
        let mut cfg = GatewayConfig::new("gw");
        cfg.buffer_capacity = 5;
        let g = Gateway::new(cfg);
        for seq in 1..=4 {
            g.accept_frame(&frame(1, seq, NOW as u32), NOW);
        }
        assert_eq!(g.pending(), 5);
        assert_eq!(g.counters().overflow_dropped, 3);
        let b = g.drain(NOW).unwrap();
        assert_eq!(b.readings.first().unwrap().seq, 2);
    }

    #[test]
    fn seen_window_forgets_old_seqs() {
        let mut cfg = GatewayConfig::new("gw");
        cfg.seen_window = 3;
        let g = Gateway::new(cfg);
        for seq in 1..=4 {
            g.accept_frame(&frame(1, seq, NOW as u32), NOW);
        }
        assert!(matches!(
            g.accept_frame(&frame(1, 1, NOW as u32), NOW),
            AcceptResult::Accepted { .. }
        ));
        assert_eq!(
            g.accept_frame(&frame(1, 4, NOW as u32), NOW),
            AcceptResult::Rejected(RejectReason::Duplicate)
        );
    }
}
