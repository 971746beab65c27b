//! Buildings, floors, rooms and the sensor nodes bound to them.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::metric::Metric;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Floor {
    pub id: String,
    pub building_id: String,
    pub level: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    N,
    E,
    S,
    W,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: String,
    pub floor_id: String,
    pub name: String,
    pub orientation: Orientation,
    pub area_m2: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildingTopology {
    pub buildings: Vec<Building>,
    pub floors: Vec<Floor>,
    pub rooms: Vec<Room>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Classroom,
    PowerMeter,
}

impl NodeKind {
    pub fn wire_byte(self) -> u8 {
        match self {
            NodeKind::Classroom => 0x01,
            NodeKind::PowerMeter => 0x02,
        }
    }

    pub fn from_wire_byte(b: u8) -> Option<NodeKind> {
        match b {
            0x01 => Some(NodeKind::Classroom),
            0x02 => Some(NodeKind::PowerMeter),
            _ => None,
        }
    }

    pub fn allows(self, metric: Metric) -> bool {
        match self {
            NodeKind::Classroom => Metric::CLASSROOM.contains(&metric),
            NodeKind::PowerMeter => metric.is_power(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Room(String),
    Building(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDescriptor {
    pub node_id: u16,
    pub kind: NodeKind,
    pub binding: Binding,
    pub metrics: Vec<Metric>,
    pub report_interval_s: u32,
}

/// A topology plus the node fleet installed in it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub topology: BuildingTopology,
    pub nodes: Vec<NodeDescriptor>,
}

impl Deployment {
    /// Checks every referential and uniqueness invariant, reporting all problems at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        let t = &self.topology;

        let mut seen = HashSet::new();
        for b in &t.buildings {
            if !seen.insert(b.id.as_str()) {
                problems.push(format!("duplicate building id {}", b.id));
            }
        }
        let mut seen = HashSet::new();
        for f in &t.floors {
            if !seen.insert(f.id.as_str()) {
                problems.push(format!("duplicate floor id {}", f.id));
            }
            if self.building(&f.building_id).is_none() {
                problems.push(format!(
                    "floor {} references unknown building {}",
                    f.id, f.building_id
                ));
            }
        }
        let mut seen = HashSet::new();
        for r in &t.rooms {
            if !seen.insert(r.id.as_str()) {
                problems.push(format!("duplicate room id {}", r.id));
            }
            if !t.floors.iter().any(|f| f.id == r.floor_id) {
                problems.push(format!(
                    "room {} references unknown floor {}",
                    r.id, r.floor_id
                ));
            }
            if !(r.area_m2 > 0.0) {
                problems.push(format!("room {} has non-positive area", r.id));
            }
        }

        let mut seen = HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n.node_id) {
                problems.push(format!("duplicate node id {}", n.node_id));
            }
            if n.report_interval_s == 0 {
                problems.push(format!("node {} has zero report interval", n.node_id));
            }
            if n.metrics.is_empty() {
                problems.push(format!("node {} carries no metrics", n.node_id));
            }
            for m in &n.metrics {
                if !n.kind.allows(*m) {
                    problems.push(format!(
                        "node {} ({:?}) cannot carry {m}",
                        n.node_id, n.kind
                    ));
                }
            }
            let distinct: HashSet<_> = n.metrics.iter().collect();
            if distinct.len() != n.metrics.len() {
                problems.push(format!("node {} lists a metric twice", n.node_id));
            }
            match (&n.kind, &n.binding) {
                (NodeKind::Classroom, Binding::Room(room)) => {
                    if self.room(room).is_none() {
                        problems.push(format!("node {} bound to unknown room {room}", n.node_id));
                    }
                }
                (NodeKind::PowerMeter, Binding::Building(b)) => {
                    if self.building(b).is_none() {
                        problems.push(format!("node {} bound to unknown building {b}", n.node_id));
                    }
                }
                (kind, binding) => problems.push(format!(
                    "node {} of kind {kind:?} cannot bind to {binding:?}",
                    n.node_id
                )),
            }
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(problems.join("; ")))
        }
    }

    pub fn building(&self, id: &str) -> Option<&Building> {
        self.topology.buildings.iter().find(|b| b.id == id)
    }

    pub fn room(&self, id: &str) -> Option<&Room> {
        self.topology.rooms.iter().find(|r| r.id == id)
    }

    pub fn node(&self, id: u16) -> Option<&NodeDescriptor> {
        self.nodes.iter().find(|n| n.node_id == id)
    }

    pub fn building_of_room(&self, room_id: &str) -> Option<&str> {
        let room = self.room(room_id)?;
        let floor = self
            .topology
            .floors
            .iter()
            .find(|f| f.id == room.floor_id)?;
        Some(floor.building_id.as_str())
    }

    /// Rooms of a building, ordered by room id.
    pub fn rooms_in_building(&self, building_id: &str) -> Vec<&Room> {
        let floors: HashSet<&str> = self
            .topology
            .floors
            .iter()
            .filter(|f| f.building_id == building_id)
            .map(|f| f.id.as_str())
            .collect();
        let mut rooms: Vec<&Room> = self
            .topology
            .rooms
            .iter()
            .filter(|r| floors.contains(r.floor_id.as_str()))
            .collect();
        rooms.sort_by(|a, b| a.id.cmp(&b.id));
        rooms
    }

    pub fn nodes_in_room(&self, room_id: &str) -> Vec<&NodeDescriptor> {
        self.nodes
            .iter()
            .filter(|n| matches!(&n.binding, Binding::Room(r) if r == room_id))
            .collect()
    }

    pub fn power_meters(&self, building_id: &str) -> Vec<&NodeDescriptor> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::PowerMeter)
            .filter(|n| matches!(&n.binding, Binding::Building(b) if b == building_id))
            .collect()
    }

    /// Building a node ultimately belongs to, through its room for classroom nodes.
    pub fn building_of_node(&self, node: &NodeDescriptor) -> Option<&str> {
        match &node.binding {
            Binding::Building(b) => self.building(b).map(|b| b.id.as_str()),
            Binding::Room(r) => self.building_of_room(r),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Deployment {
        Deployment {
            topology: BuildingTopology {
                buildings: vec![Building {
                    id: "b1".into(),
                    name: "School".into(),
                }],
                floors: vec![Floor {
                    id: "f0".into(),
                    building_id: "b1".into(),
                    level: 0,
                }],
                rooms: vec![
                    Room {
                        id: "r2".into(),
                        floor_id: "f0".into(),
                        name: "Lab".into(),
                        orientation: Orientation::S,
                        area_m2: 40.0,
                    },
                    Room {
                        id: "r1".into(),
                        floor_id: "f0".into(),
                        name: "Class A".into(),
                        orientation: Orientation::N,
                        area_m2: 50.0,
                    },
                ],
            },
            nodes: vec![
                NodeDescriptor {
                    node_id: 1,
                    kind: NodeKind::Classroom,
                    binding: Binding::Room("r1".into()),
                    metrics: Metric::CLASSROOM.to_vec(),
                    report_interval_s: 60,
                },
                NodeDescriptor {
                    node_id: 100,
                    kind: NodeKind::PowerMeter,
                    binding: Binding::Building("b1".into()),
                    metrics: Metric::PHASES.to_vec(),
                    report_interval_s: 60,
                },
            ],
        }
    }

    #[test]
    fn valid_deployment_and_lookups() {
        let d = small();
        d.validate().unwrap();
        assert_eq!(d.building_of_room("r1"), Some("b1"));
        let ids: Vec<_> = d
            .rooms_in_building("b1")
            .iter()
            .map(|r| r.id.as_str())
            .collect();
        assert_eq!(ids, ["r1", "r2"]);
        assert_eq!(d.nodes_in_room("r1").len(), 1);
        assert_eq!(d.power_meters("b1")[0].node_id, 100);
        assert_eq!(d.building_of_node(d.node(1).unwrap()), Some("b1"));
    }

    #[test]
    fn dangling_and_mismatched_bindings_reported() {
        let mut d = small();
        d.nodes[0].binding = Binding::Room("nowhere".into());
        d.nodes[1].metrics.push(Metric::Temperature);
        d.topology.rooms[0].floor_id = "f9".into();
        let err = d.validate().unwrap_err().to_string();
        assert!(err.contains("unknown room nowhere"), "{err}");
        assert!(err.contains("cannot carry temperature"), "{err}");
        assert!(err.contains("unknown floor f9"), "{err}");
    }

    #[test]
    fn duplicate_node_ids_rejected() {
        let mut d = small();
        d.nodes[1].node_id = 1;
        assert!(d
            .validate()
            .unwrap_err()
            .to_string()
            .contains("duplicate node id 1"));
    }

    #[test]
    fn binding_json_shape() {
        let json = serde_json::to_value(&small().nodes[0]).unwrap();
        assert_eq!(json["binding"]["room"], "r1");
        assert_eq!(json["kind"], "classroom");
        assert_eq!(json["metrics"][0], "temperature");
    }
}
