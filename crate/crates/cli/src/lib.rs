//! Operator commands behind the `gaia` binary.

use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use gaia_api::platform::{
    load_deployment, DEPLOYMENT_FILE, QUEST_MAP_FILE, ROSTER_FILE, TELEMETRY_DIR,
};
use gaia_challenge::demo::{DEMO_QUEST_MAP_JSON, DEMO_ROSTER_JSON};
use gaia_core::frame::decode_frame;
use gaia_core::replay::FrameReader;
use gaia_core::{Metric, UploadBatch};
use gaia_gateway::{pump, Counters, Gateway, GatewayConfig, UploadError, Upstream};
use gaia_sim::demo::demo_config;
use gaia_sim::{write_replay, Fleet, SimConfig};
use gaia_store::{IngestBatch, Store, StoreConfig, Target};

pub const SECONDS_PER_HOUR: u32 = 3600;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimReport {
    pub frames: usize,
    pub bytes: u64,
}

/// Simulates `hours` of fleet traffic and writes it as a replay file.
pub fn run_sim(config: SimConfig, hours: u32, out: &Path) -> Result<SimReport> {
    let until = config.start_ts + hours * SECONDS_PER_HOUR;
    let mut fleet = Fleet::new(config)?;
    let frames = fleet.advance(until)?;
    let file = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    write_replay(&mut w, &frames)?;
    w.flush()?;
    let bytes = fs::metadata(out)?.len();
    Ok(SimReport {
        frames: frames.len(),
        bytes,
    })
}

/// Writes the bundled deployment, roster and quest map into `storage`.
/// Existing files are kept unless `overwrite` is set. Returns the names written.
pub fn write_demo_definitions(storage: &Path, overwrite: bool) -> Result<Vec<&'static str>> {
    fs::create_dir_all(storage).with_context(|| format!("creating {}", storage.display()))?;
    let deployment = serde_json::to_string_pretty(&demo_config().deployment)?;
    let mut written = Vec::new();
    for (name, body) in [
        (DEPLOYMENT_FILE, deployment.as_str()),
        (ROSTER_FILE, DEMO_ROSTER_JSON),
        (QUEST_MAP_FILE, DEMO_QUEST_MAP_JSON),
    ] {
        let path = storage.join(name);
        if overwrite || !path.exists() {
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            written.push(name);
        }
    }
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct SeedReport {
    pub frames: usize,
    pub stored: usize,
    pub gateway: Counters,
    pub elapsed: Duration,
}

/// Populates `storage` with the demo definitions and `hours` of simulated
/// telemetry pushed through an in-process gateway into the store.
pub fn seed_demo(storage: &Path, hours: u32) -> Result<SeedReport> {
    let started = Instant::now();
    write_demo_definitions(storage, true)?;
    let config = demo_config();
    let store = Store::open(
        &storage.join(TELEMETRY_DIR),
        Arc::new(config.deployment.clone()),
        StoreConfig::default(),
    )?;
    let until = config.start_ts + hours * SECONDS_PER_HOUR;
    let frames = Fleet::new(config)?.advance(until)?;

    let gateway = Gateway::new(GatewayConfig::new("gw-seed"));
    let mut upstream = |b: &UploadBatch| -> Result<(), UploadError> {
        store
            .ingest(&IngestBatch::from(b))
            .map(|_| ())
            .map_err(|e| UploadError(e.to_string()))
    };
    for f in &frames {
        gateway.accept_frame(&f.bytes, f.ts as u64);
        pump(&gateway, &mut upstream, f.ts as u64, false);
    }
    let now = until as u64;
    pump(&gateway, &mut upstream, now, true);
    if gateway.retained() > 0 {
        bail!("{} readings could not be stored", gateway.retained());
    }
    Ok(SeedReport {
        frames: frames.len(),
        stored: store.len(),
        gateway: gateway.counters(),
        elapsed: started.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub gateway_id: String,
    /// Fixed gateway clock. When unset the clock follows the newest frame time.
    pub now: Option<u64>,
    /// Upload attempts allowed while draining the buffer at end of input.
    pub max_drain_attempts: u32,
    /// Caps each real wait between drain attempts.
    pub max_wait: Duration,
}

impl ReplayOptions {
    pub fn new(gateway_id: impl Into<String>) -> Self {
        ReplayOptions {
            gateway_id: gateway_id.into(),
            now: None,
            max_drain_attempts: 8,
            max_wait: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub frames: usize,
    pub batches: usize,
    pub gateway: Counters,
}

/// Feeds a replay file through a gateway that uploads to `upstream`.
pub fn replay_file(
    input: &Path,
    upstream: &mut dyn Upstream,
    opts: &ReplayOptions,
) -> Result<ReplayReport> {
    let file = fs::File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let mut reader = FrameReader::new(BufReader::new(file));
    let gateway = Gateway::new(GatewayConfig::new(opts.gateway_id.clone()));
    let mut clock = opts.now.unwrap_or(0);
    let mut frames = 0;
    let mut batches = 0;
    while let Some(frame) = reader
        .next_frame()
        .with_context(|| format!("reading {}", input.display()))?
    {
        frames += 1;
        if opts.now.is_none() {
            if let Ok(report) = decode_frame(&frame) {
                clock = clock.max(report.ts as u64);
            }
        }
        gateway.accept_frame(&frame, clock);
        batches += pump(&gateway, upstream, clock, false).uploaded;
    }

    let mut attempts = 0;
    while gateway.retained() > 0 {
        if attempts >= opts.max_drain_attempts {
            bail!(
                "giving up with {} readings unacknowledged",
                gateway.retained()
            );
        }
        if let Some(at) = gateway.next_retry_at() {
            let wait = at.saturating_sub(clock);
            std::thread::sleep(Duration::from_secs(wait).min(opts.max_wait));
            clock = clock.max(at);
        }
        let stats = pump(&gateway, upstream, clock, true);
        batches += stats.uploaded;
        attempts += stats.failed as u32;
    }
    Ok(ReplayReport {
        frames,
        batches,
        gateway: gateway.counters(),
    })
}

/// Writes one room's readings of `metric` in `[from, to)` as CSV. The store is
/// opened read-only so a running server is not disturbed. Returns the row count.
pub fn export_csv<W: io::Write>(
    storage: &Path,
    room: &str,
    metric: Metric,
    from: i64,
    to: i64,
    out: W,
) -> Result<usize> {
    let deployment = load_deployment(&storage.join(DEPLOYMENT_FILE))?;
    let store = Store::open_read_only(
        &storage.join(TELEMETRY_DIR),
        Arc::new(deployment),
        StoreConfig::default(),
    )?;
    let rows = store.series(&Target::Room(room.to_string()), metric, from, to)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ts", "node_id", "metric", "value"])?;
    for r in &rows {
        w.write_record([
            r.ts.to_string(),
            r.node_id.to_string(),
            r.metric.name().to_string(),
            r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(rows.len())
}
