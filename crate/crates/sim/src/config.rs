use std::collections::BTreeSet;
use std::path::Path;

use gaia_core::{ConfigError, Deployment};
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupancy {
    pub start_hour: u32,
    pub end_hour: u32,
}

impl Default for Occupancy {
    fn default() -> Self {
        Occupancy {
            start_hour: 8,
            end_hour: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Drop,
    CorruptByte,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppliesTo {
    Seqs(BTreeSet<u32>),
    Rate(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub node_id: u16,
    pub kind: FaultKind,
    pub applies_to: AppliesTo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub start_ts: u32,
    #[serde(flatten)]
    pub deployment: Deployment,
    #[serde(default)]
    pub occupancy: Occupancy,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
}

impl SimConfig {
    pub fn from_json(s: &str) -> Result<Self, SimError> {
        let cfg: SimConfig =
            serde_json::from_str(s).map_err(|e| ConfigError::new(format!("sim config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.deployment.validate()?;
        let mut problems = Vec::new();
        if self.occupancy.start_hour > self.occupancy.end_hour || self.occupancy.end_hour > 24 {
            problems.push(format!(
                "occupancy {}..{} is not a valid hour span",
                self.occupancy.start_hour, self.occupancy.end_hour
            ));
        }
        for f in &self.faults {
            if self.deployment.node(f.node_id).is_none() {
                problems.push(format!("fault targets unknown node {}", f.node_id));
            }
            if let AppliesTo::Rate(r) = f.applies_to {
                if !(0.0..=1.0).contains(&r) {
                    problems.push(format!("fault rate {r} outside [0, 1]"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(problems.join("; ")))
        }
    }
}
