use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{NaiveDate, TimeZone};
use chrono_tz::Tz;
use gaia_core::linelog::{self, LineLog, LogError};
use gaia_core::{Deployment, Metric, Reading, ReadingKey};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::ingest::{IngestBatch, IngestResult, Rejection};
use crate::query::{self, AggFn, AggPoint};
use crate::StoreError;

pub const DEFAULT_SEGMENT_BYTES: u64 = 64 * 1024 * 1024;
const SEGMENT_DIR: &str = "segments";

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub segment_max_bytes: u64,
    /// Zone whose civil days bound `daily_energy`.
    pub timezone: Tz,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            segment_max_bytes: DEFAULT_SEGMENT_BYTES,
            timezone: Tz::UTC,
        }
    }
}

/// What a query is about: one node, every node in a room, or a building.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Node(u16),
    Room(String),
    /// For power metrics, the building's meters; otherwise all its classroom nodes.
    Building(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyEnergy {
    pub phase_a_kwh: f64,
    pub phase_b_kwh: f64,
    pub phase_c_kwh: f64,
    pub total_kwh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Sample {
    ts: u32,
    seq: u32,
    value: f64,
}

#[derive(Debug, Default)]
struct Index {
    series: HashMap<(u16, Metric), Vec<Sample>>,
    keys: HashSet<ReadingKey>,
}

impl Index {
    fn insert(&mut self, r: &Reading) -> bool {
        if !self.keys.insert(r.key()) {
            return false;
        }
        let s = Sample {
            ts: r.ts,
            seq: r.seq,
            value: r.value,
        };
        let v = self.series.entry((r.node_id, r.metric)).or_default();
        match v.last() {
            Some(last) if (last.ts, last.seq) > (s.ts, s.seq) => {
                let at = v.partition_point(|x| (x.ts, x.seq) <= (s.ts, s.seq));
                v.insert(at, s);
            }
            _ => v.push(s),
        }
        true
    }
}

#[derive(Debug)]
struct Writer {
    segments_dir: PathBuf,
    segment_no: u32,
    log: LineLog,
}

fn segment_path(dir: &Path, n: u32) -> PathBuf {
    dir.join(format!("{n:06}.log"))
}

fn sync_dir(dir: &Path) {
    // directory fsync is best-effort; not all platforms allow opening dirs
    if let Ok(d) = fs::File::open(dir) {
        let _ = d.sync_all();
    }
}

/// Sorted segment numbers present in `segments_dir`.
fn list_segments(segments_dir: &Path) -> Result<Vec<u32>, StoreError> {
    let mut nums = Vec::new();
    for entry in fs::read_dir(segments_dir).map_err(|e| StoreError::io(segments_dir, e))? {
        let entry = entry.map_err(|e| StoreError::io(segments_dir, e))?;
        let name = entry.file_name();
        let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".log")) else {
            continue;
        };
        if stem.len() == 6 {
            if let Ok(n) = stem.parse::<u32>() {
                nums.push(n);
            }
        }
    }
    nums.sort_unstable();
    Ok(nums)
}

/// Every record in the storage directory, in write order, without deduplication.
/// Intended for audits; a torn tail in the final segment is skipped.
pub fn scan_segments(dir: &Path) -> Result<Vec<Reading>, StoreError> {
    let segments_dir = dir.join(SEGMENT_DIR);
    let nums = list_segments(&segments_dir)?;
    let mut out = Vec::new();
    for (i, n) in nums.iter().enumerate() {
        let last = i + 1 == nums.len();
        let replayed = linelog::replay::<Reading>(&segment_path(&segments_dir, *n), last)?;
        out.extend(replayed.records);
    }
    Ok(out)
}

/// Append-only telemetry store.
///
/// Ingest is serialized by the writer lock and acknowledged only after the
/// batch is synced to the active segment; the in-memory index is updated
/// afterwards, so queries observe acknowledged data only.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    deployment: Arc<Deployment>,
    config: StoreConfig,
    /// `None` for a read-only handle.
    writer: Mutex<Option<Writer>>,
    index: RwLock<Index>,
    torn_tail_bytes: u64,
}

impl Store {
    /// Opens (or creates) a store in `dir`, rebuilding the index from its segments.
    pub fn open(
        dir: &Path,
        deployment: Arc<Deployment>,
        config: StoreConfig,
    ) -> Result<Self, StoreError> {
        let segments_dir = dir.join(SEGMENT_DIR);
        fs::create_dir_all(&segments_dir).map_err(|e| StoreError::io(&segments_dir, e))?;
        Self::open_inner(dir, deployment, config, true)
    }

    /// Opens a store for queries only. Nothing on disk is modified, so this is
    /// safe while another process is writing; a partial final record is
    /// skipped. A missing directory reads as empty.
    pub fn open_read_only(
        dir: &Path,
        deployment: Arc<Deployment>,
        config: StoreConfig,
    ) -> Result<Self, StoreError> {
        Self::open_inner(dir, deployment, config, false)
    }

    fn open_inner(
        dir: &Path,
        deployment: Arc<Deployment>,
        config: StoreConfig,
        writable: bool,
    ) -> Result<Self, StoreError> {
        let segments_dir = dir.join(SEGMENT_DIR);
        let nums = if segments_dir.exists() {
            list_segments(&segments_dir)?
        } else {
            Vec::new()
        };

        let mut index = Index::default();
        let mut tail = (0u32, 0u64);
        let mut torn_tail_bytes = 0;
        for (i, n) in nums.iter().enumerate() {
            let last = i + 1 == nums.len();
            let path = segment_path(&segments_dir, *n);
            let replayed = linelog::replay::<Reading>(&path, last)?;
            for r in &replayed.records {
                index.insert(r);
            }
            if last {
                tail = (*n, replayed.valid_len);
                if replayed.torn_tail {
                    let on_disk = fs::metadata(&path)
                        .map_err(|e| StoreError::io(&path, e))?
                        .len();
                    torn_tail_bytes = on_disk - replayed.valid_len;
                }
            }
        }

        let writer = if writable {
            let (segment_no, valid_len) = tail;
            let path = segment_path(&segments_dir, segment_no);
            let log = LineLog::open(&path, valid_len)?;
            if nums.is_empty() {
                sync_dir(&segments_dir);
            }
            Some(Writer {
                segments_dir,
                segment_no,
                log,
            })
        } else {
            None
        };
        Ok(Store {
            dir: dir.to_path_buf(),
            deployment,
            config,
            writer: Mutex::new(writer),
            index: RwLock::new(index),
            torn_tail_bytes,
        })
    }

    /// Bytes of an incomplete final record discarded when the store was opened.
    pub fn torn_tail_bytes(&self) -> u64 {
        self.torn_tail_bytes
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn deployment(&self) -> &Deployment {
        &self.deployment
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    /// Number of distinct readings stored.
    pub fn len(&self) -> usize {
        self.index.read().keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ingest(&self, batch: &IngestBatch) -> Result<IngestResult, StoreError> {
        let mut guard = self.writer.lock();
        let writer = guard.as_mut().ok_or(StoreError::ReadOnly)?;
        let mut result = IngestResult::default();
        let mut fresh: Vec<Reading> = Vec::new();
        {
            let index = self.index.read();
            let mut in_batch = HashSet::new();
            for (i, raw) in batch.readings.iter().enumerate() {
                match raw.validate() {
                    Err(reason) => result.rejected.push(Rejection { index: i, reason }),
                    Ok(r) => {
                        if index.keys.contains(&r.key()) || !in_batch.insert(r.key()) {
                            result.duplicates += 1;
                        } else {
                            fresh.push(r);
                        }
                    }
                }
            }
        }
        if !fresh.is_empty() {
            let mut buf = Vec::with_capacity(fresh.len() * 96);
            for r in &fresh {
                serde_json::to_writer(&mut buf, r).expect("reading serializes");
                buf.push(b'\n');
            }
            if !writer.log.is_empty()
                && writer.log.len() + buf.len() as u64 > self.config.segment_max_bytes
            {
                let next = writer.segment_no + 1;
                let path = segment_path(&writer.segments_dir, next);
                writer.log = LineLog::open(&path, 0)?;
                writer.segment_no = next;
                sync_dir(&writer.segments_dir);
            }
            writer.log.append_raw(&buf)?;
            let mut index = self.index.write();
            for r in &fresh {
                index.insert(r);
            }
        }
        result.accepted = fresh.len();
        Ok(result)
    }

    fn resolve(&self, target: &Target, metric: Metric) -> Result<Vec<u16>, StoreError> {
        let d = &self.deployment;
        match target {
            Target::Node(id) => {
                d.node(*id)
                    .ok_or_else(|| StoreError::NotFound(format!("node {id}")))?;
                Ok(vec![*id])
            }
            Target::Room(room) => {
                d.room(room)
                    .ok_or_else(|| StoreError::NotFound(format!("room {room}")))?;
                Ok(d.nodes_in_room(room).iter().map(|n| n.node_id).collect())
            }
            Target::Building(b) => {
                d.building(b)
                    .ok_or_else(|| StoreError::NotFound(format!("building {b}")))?;
                let ids = if metric.is_power() {
                    d.power_meters(b).iter().map(|n| n.node_id).collect()
                } else {
                    d.rooms_in_building(b)
                        .iter()
                        .flat_map(|r| d.nodes_in_room(&r.id))
                        .map(|n| n.node_id)
                        .collect()
                };
                Ok(ids)
            }
        }
    }

    /// Most recent reading (max ts, then max seq) across the target's nodes.
    pub fn latest(&self, target: &Target, metric: Metric) -> Result<Option<Reading>, StoreError> {
        let nodes = self.resolve(target, metric)?;
        let index = self.index.read();
        let best = nodes
            .iter()
            .filter_map(|n| {
                index
                    .series
                    .get(&(*n, metric))
                    .and_then(|v| v.last())
                    .map(|s| (*n, *s))
            })
            .max_by_key(|(n, s)| (s.ts, s.seq, *n));
        Ok(best.map(|(node_id, s)| Reading {
            node_id,
            metric,
            value: s.value,
            ts: s.ts,
            seq: s.seq,
        }))
    }

    /// Readings with `from_ts <= ts < to_ts`, ascending by (ts, seq, node).
    pub fn series(
        &self,
        target: &Target,
        metric: Metric,
        from_ts: i64,
        to_ts: i64,
    ) -> Result<Vec<Reading>, StoreError> {
        if from_ts > to_ts {
            return Err(StoreError::InvalidRange(format!(
                "from {from_ts} > to {to_ts}"
            )));
        }
        let nodes = self.resolve(target, metric)?;
        let index = self.index.read();
        let mut out = Vec::new();
        for n in nodes {
            let Some(v) = index.series.get(&(n, metric)) else {
                continue;
            };
            let lo = v.partition_point(|s| (s.ts as i64) < from_ts);
            let hi = v.partition_point(|s| (s.ts as i64) < to_ts);
            out.extend(v[lo..hi].iter().map(|s| Reading {
                node_id: n,
                metric,
                value: s.value,
                ts: s.ts,
                seq: s.seq,
            }));
        }
        out.sort_by_key(|r| (r.ts, r.seq, r.node_id));
        Ok(out)
    }

    pub fn aggregate(
        &self,
        target: &Target,
        metric: Metric,
        from_ts: i64,
        to_ts: i64,
        window_s: u32,
        func: AggFn,
    ) -> Result<Vec<AggPoint>, StoreError> {
        if window_s == 0 {
            return Err(StoreError::InvalidRange(
                "window must be at least 1 s".into(),
            ));
        }
        let series = self.series(target, metric, from_ts, to_ts)?;
        Ok(query::aggregate_sorted(&series, window_s, func))
    }

    /// Bounds of a civil day in the configured zone, as unix seconds.
    pub fn day_bounds(&self, date: NaiveDate) -> (i64, i64) {
        let tz = self.config.timezone;
        let midnight = |d: NaiveDate| {
            let naive = d.and_hms_opt(0, 0, 0).expect("midnight exists");
            match tz.from_local_datetime(&naive).earliest() {
                Some(t) => t.timestamp(),
                // midnight skipped by a DST jump; the day starts an hour later
                None => tz
                    .from_local_datetime(&(naive + chrono::Duration::hours(1)))
                    .earliest()
                    .map(|t| t.timestamp())
                    .unwrap_or_else(|| naive.and_utc().timestamp()),
            }
        };
        let next = date.succ_opt().unwrap_or(date);
        (midnight(date), midnight(next))
    }

    /// Integrated energy of a building's power feed over one civil day, or
    /// `None` when no power sample falls inside the day.
    pub fn daily_energy(
        &self,
        building_id: &str,
        date: NaiveDate,
    ) -> Result<Option<DailyEnergy>, StoreError> {
        let d = &self.deployment;
        d.building(building_id)
            .ok_or_else(|| StoreError::NotFound(format!("building {building_id}")))?;
        let (start, end) = self.day_bounds(date);
        let meters = d.power_meters(building_id);
        let index = self.index.read();
        let mut kwh = [0.0f64; 3];
        let mut any = false;
        for meter in meters {
            let max_gap = 2 * meter.report_interval_s as i64;
            for (i, phase) in Metric::PHASES.iter().enumerate() {
                let Some(v) = index.series.get(&(meter.node_id, *phase)) else {
                    continue;
                };
                let lo = v.partition_point(|s| (s.ts as i64) < start - max_gap);
                let hi = v.partition_point(|s| (s.ts as i64) <= end + max_gap);
                let window = &v[lo..hi];
                any |= window
                    .iter()
                    .any(|s| (s.ts as i64) >= start && (s.ts as i64) < end);
                let pts: Vec<(i64, f64)> = window.iter().map(|s| (s.ts as i64, s.value)).collect();
                kwh[i] += query::integrate_power(&pts, start, end, max_gap) / query::JOULES_PER_KWH;
            }
        }
        if !any {
            return Ok(None);
        }
        Ok(Some(DailyEnergy {
            phase_a_kwh: kwh[0],
            phase_b_kwh: kwh[1],
            phase_c_kwh: kwh[2],
            total_kwh: kwh.iter().sum(),
        }))
    }
}

impl From<LogError> for StoreError {
    fn from(e: LogError) -> Self {
        match e {
            LogError::Io { path, source } => StoreError::Io { path, source },
            LogError::Corrupt {
                path,
                offset,
                reason,
            } => StoreError::Recovery {
                segment: path,
                offset,
                reason,
            },
        }
    }
}
