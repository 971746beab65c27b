//! Bundled demo fleet: one school building, ten classrooms and a power meter
//! reporting every 60 s, with a handful of injected faults.

use crate::config::{AppliesTo, FaultKind, SimConfig};

pub const DEMO_CONFIG_JSON: &str = include_str!("../demo/sim_config.json");

pub fn demo_config() -> SimConfig {
    SimConfig::from_json(DEMO_CONFIG_JSON).expect("bundled demo config is valid")
}

/// Frames per node that never reach storage over `reports` scheduled reports:
/// dropped ones and corrupted ones.
pub fn lost_reports(config: &SimConfig, node_id: u16, reports: u32) -> u32 {
    let mut lost = std::collections::BTreeSet::new();
    for f in config.faults.iter().filter(|f| f.node_id == node_id) {
        if matches!(f.kind, FaultKind::Drop | FaultKind::CorruptByte) {
            match &f.applies_to {
                AppliesTo::Seqs(s) => {
                    lost.extend(s.iter().copied().filter(|&q| (1..=reports).contains(&q)))
                }
                AppliesTo::Rate(_) => panic!("rate faults have no closed-form loss count"),
            }
        }
    }
    lost.len() as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_parses() {
        let c = demo_config();
        assert_eq!(c.deployment.nodes.len(), 11);
        assert_eq!(c.deployment.topology.rooms.len(), 10);
        assert_eq!(lost_reports(&c, 3, 1440), 2);
        assert_eq!(lost_reports(&c, 5, 1440), 1);
        assert_eq!(lost_reports(&c, 7, 1440), 0);
        assert_eq!(lost_reports(&c, 1, 1440), 0);
    }
}
