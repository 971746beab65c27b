use std::collections::BTreeMap;
use std::io::{self, Write};

use gaia_core::frame::{encode_frame, NodeReport, Record, FRAME_VERSION};
use gaia_core::replay::write_frame;
use gaia_core::NodeDescriptor;
use rand::Rng;

use crate::config::{AppliesTo, FaultKind, SimConfig};
use crate::model::{self, Model};
use crate::SimError;

/// One emitted frame with the header fields the simulator knows it carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimFrame {
    pub ts: u32,
    pub node_id: u16,
    pub seq: u32,
    pub bytes: Vec<u8>,
}

/// Stepping state of a simulated fleet.
#[derive(Debug, Clone)]
pub struct Fleet {
    config: SimConfig,
    model: Model,
    clock: u32,
    /// Reports generated so far per node; dropped reports still consume a seq.
    seqs: BTreeMap<u16, u32>,
}

impl Fleet {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let model = Model::new(config.seed, config.occupancy, &config.deployment);
        let seqs = config
            .deployment
            .nodes
            .iter()
            .map(|n| (n.node_id, 0))
            .collect();
        Ok(Fleet {
            clock: config.start_ts,
            config,
            model,
            seqs,
        })
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.model = model;
        self
    }

    pub fn clock(&self) -> u32 {
        self.clock
    }

    pub fn seqs(&self) -> &BTreeMap<u16, u32> {
        &self.seqs
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    fn report_for(&self, node: &NodeDescriptor, seq: u32, ts: u32) -> Result<NodeReport, SimError> {
        let mut records = Vec::with_capacity(node.metrics.len());
        for &metric in &node.metrics {
            let value = self.model.sample_metric(node, metric, ts)?;
            let wire = metric.to_wire(value).expect("model clamps to metric range");
            records.push(Record::new(metric, wire));
        }
        Ok(NodeReport {
            version: FRAME_VERSION,
            node_kind: node.kind,
            node_id: node.node_id,
            seq,
            ts,
            records,
        })
    }

    fn fault_applies(&self, node_id: u16, kind: FaultKind, seq: u32) -> bool {
        let tag = match kind {
            FaultKind::Drop => model::TAG_FAULT_DROP,
            FaultKind::CorruptByte => model::TAG_FAULT_CORRUPT,
            FaultKind::Duplicate => model::TAG_FAULT_DUPLICATE,
        };
        self.config
            .faults
            .iter()
            .filter(|f| f.node_id == node_id && f.kind == kind)
            .any(|f| match &f.applies_to {
                AppliesTo::Seqs(seqs) => seqs.contains(&seq),
                AppliesTo::Rate(rate) => model::stream(self.config.seed, node_id, tag, seq)
                    .random_bool(rate.clamp(0.0, 1.0)),
            })
    }

    /// Runs the fleet forward to `until_ts`, returning every frame due in
    /// `(clock, until_ts]` ordered by `(ts, node_id)`.
    pub fn advance(&mut self, until_ts: u32) -> Result<Vec<SimFrame>, SimError> {
        let mut due: Vec<(u32, u16, u32)> = Vec::new();
        if until_ts > self.clock {
            for node in &self.config.deployment.nodes {
                let interval = node.report_interval_s;
                let generated = self
                    .seqs
                    .get_mut(&node.node_id)
                    .expect("seq counter per node");
                loop {
                    let next_seq = *generated + 1;
                    let ts = self.config.start_ts as u64 + next_seq as u64 * interval as u64;
                    if ts > until_ts as u64 {
                        break;
                    }
                    due.push((ts as u32, node.node_id, next_seq));
                    *generated = next_seq;
                }
            }
            self.clock = until_ts;
        }
        due.sort_unstable();

        let mut out = Vec::with_capacity(due.len());
        for (ts, node_id, seq) in due {
            if self.fault_applies(node_id, FaultKind::Drop, seq) {
                continue;
            }
            let node = self.config.deployment.node(node_id).expect("node exists");
            let mut bytes = encode_frame(&self.report_for(node, seq, ts)?)
                .expect("simulated reports satisfy frame invariants");
            if self.fault_applies(node_id, FaultKind::CorruptByte, seq) {
                let mut rng = model::stream(self.config.seed, node_id, model::TAG_CORRUPT_POS, seq);
                let pos = rng.random_range(0..bytes.len());
                let mask: u8 = rng.random_range(1..=255);
                bytes[pos] ^= mask;
            }
            let duplicate = self.fault_applies(node_id, FaultKind::Duplicate, seq);
            let frame = SimFrame {
                ts,
                node_id,
                seq,
                bytes,
            };
            if duplicate {
                out.push(frame.clone());
            }
            out.push(frame);
        }
        Ok(out)
    }
}

/// Builds the initial fleet state at the configured start time.
pub fn build_fleet(config: SimConfig) -> Result<Fleet, SimError> {
    Fleet::new(config)
}

/// Writes frames as a length-prefixed replay stream.
pub fn write_replay<W: Write>(w: &mut W, frames: &[SimFrame]) -> io::Result<()> {
    for f in frames {
        write_frame(w, &f.bytes)?;
    }
    Ok(())
}
