use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use gaia_core::Metric;
use serde::{Deserialize, Serialize};

pub const MIN_AREA: u8 = 1;
pub const MAX_AREA: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestKind {
    Quiz,
    SequenceMember,
    LiveData,
    Bonus,
    Labkit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduce {
    ArgmaxRoom,
    ArgminRoom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Quiz {
        question: String,
        choices: Vec<String>,
        correct_index: usize,
    },
    LiveData {
        question: String,
        /// Building whose rooms are compared.
        target: String,
        metric: Metric,
        reduce: Reduce,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestNode {
    pub id: String,
    pub title: String,
    pub area: u8,
    pub points: u32,
    pub kind: QuestKind,
    #[serde(default)]
    pub prerequisites: BTreeSet<String>,
    pub payload: Payload,
}

/// Definition file layout. Sequences are ordered groups; each member after
/// the first implicitly requires its predecessor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestMapFile {
    pub quests: Vec<QuestNode>,
    #[serde(default)]
    pub sequences: Vec<Vec<String>>,
    #[serde(default)]
    pub bonus_area: BTreeSet<String>,
    #[serde(default)]
    pub labkit_area: BTreeSet<String>,
    pub finish: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapProblem {
    DuplicateId(String),
    Area {
        quest: String,
        area: u8,
    },
    DanglingPrerequisite {
        quest: String,
        prerequisite: String,
    },
    Cycle(Vec<String>),
    CorrectIndex {
        quest: String,
        index: usize,
        choices: usize,
    },
    PayloadKind {
        quest: String,
    },
    GateOverlap(String),
    GateKind {
        quest: String,
        area: &'static str,
    },
    UnknownAreaMember {
        area: &'static str,
        quest: String,
    },
    Sequence(String),
    NoStart,
    Finish(String),
}

impl fmt::Display for MapProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapProblem::DuplicateId(id) => write!(f, "duplicate quest id {id:?}"),
            MapProblem::Area { quest, area } => {
                write!(
                    f,
                    "quest {quest:?} has area {area}, expected {MIN_AREA}..={MAX_AREA}"
                )
            }
            MapProblem::DanglingPrerequisite {
                quest,
                prerequisite,
            } => {
                write!(f, "quest {quest:?} requires unknown quest {prerequisite:?}")
            }
            MapProblem::Cycle(ids) => write!(f, "prerequisite cycle among {}", ids.join(", ")),
            MapProblem::CorrectIndex {
                quest,
                index,
                choices,
            } => {
                write!(
                    f,
                    "quest {quest:?} correct_index {index} outside {choices} choices"
                )
            }
            MapProblem::PayloadKind { quest } => {
                write!(f, "quest {quest:?} payload does not match its kind")
            }
            MapProblem::GateOverlap(id) => {
                write!(f, "quest {id:?} is in both bonus_area and labkit_area")
            }
            MapProblem::GateKind { quest, area } => {
                write!(f, "quest {quest:?} kind and {area} membership disagree")
            }
            MapProblem::UnknownAreaMember { area, quest } => {
                write!(f, "{area} lists unknown quest {quest:?}")
            }
            MapProblem::Sequence(msg) => write!(f, "sequence: {msg}"),
            MapProblem::NoStart => f.write_str("no ungated quest without prerequisites"),
            MapProblem::Finish(msg) => write!(f, "finish: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct MapValidationError {
    pub problems: Vec<MapProblem>,
}

impl fmt::Display for MapValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid quest map ({} problems)", self.problems.len())?;
        for p in &self.problems {
            write!(f, "; {p}")?;
        }
        Ok(())
    }
}

/// Validated quest map. Sequence ordering is folded into prerequisites.
#[derive(Debug, Clone)]
pub struct QuestMap {
    quests: BTreeMap<String, QuestNode>,
    order: Vec<String>,
    sequences: Vec<Vec<String>>,
    bonus_area: BTreeSet<String>,
    labkit_area: BTreeSet<String>,
    finish: String,
}

impl QuestMap {
    pub fn from_json(s: &str) -> Result<Self, MapValidationError> {
        let file: QuestMapFile = serde_json::from_str(s).map_err(|e| MapValidationError {
            problems: vec![MapProblem::Sequence(format!("unparsable definition: {e}"))],
        })?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self, MapValidationError> {
        let s = std::fs::read_to_string(path).map_err(|e| MapValidationError {
            problems: vec![MapProblem::Sequence(format!(
                "cannot read {}: {e}",
                path.display()
            ))],
        })?;
        Self::from_json(&s)
    }

    pub fn from_file(file: QuestMapFile) -> Result<Self, MapValidationError> {
        let mut problems = Vec::new();
        let mut quests: BTreeMap<String, QuestNode> = BTreeMap::new();
        for q in file.quests {
            if quests.contains_key(&q.id) {
                problems.push(MapProblem::DuplicateId(q.id.clone()));
            } else {
                quests.insert(q.id.clone(), q);
            }
        }

        for seq in &file.sequences {
            if seq.len() < 2 {
                problems.push(MapProblem::Sequence(format!(
                    "{seq:?} has fewer than two members"
                )));
            }
            for w in seq.windows(2) {
                match quests.get_mut(&w[1]) {
                    Some(q) => {
                        q.prerequisites.insert(w[0].clone());
                    }
                    None => {
                        problems.push(MapProblem::Sequence(format!("unknown member {:?}", w[1])))
                    }
                }
            }
            if let Some(first) = seq.first() {
                if !quests.contains_key(first) {
                    problems.push(MapProblem::Sequence(format!("unknown member {first:?}")));
                }
            }
        }
        let in_sequence: BTreeSet<&String> = file.sequences.iter().flatten().collect();

        for q in quests.values() {
            if !(MIN_AREA..=MAX_AREA).contains(&q.area) {
                problems.push(MapProblem::Area {
                    quest: q.id.clone(),
                    area: q.area,
                });
            }
            for p in &q.prerequisites {
                if !quests.contains_key(p) {
                    problems.push(MapProblem::DanglingPrerequisite {
                        quest: q.id.clone(),
                        prerequisite: p.clone(),
                    });
                }
            }
            match (&q.kind, &q.payload) {
                (QuestKind::LiveData, Payload::LiveData { .. }) => {}
                (QuestKind::LiveData, _) | (_, Payload::LiveData { .. }) => {
                    problems.push(MapProblem::PayloadKind {
                        quest: q.id.clone(),
                    })
                }
                (
                    _,
                    Payload::Quiz {
                        choices,
                        correct_index,
                        ..
                    },
                ) => {
                    if *correct_index >= choices.len() {
                        problems.push(MapProblem::CorrectIndex {
                            quest: q.id.clone(),
                            index: *correct_index,
                            choices: choices.len(),
                        });
                    }
                }
            }
            if (q.kind == QuestKind::SequenceMember) != in_sequence.contains(&q.id) {
                problems.push(MapProblem::Sequence(format!(
                    "quest {:?} kind sequence_member and sequence membership disagree",
                    q.id
                )));
            }
            if (q.kind == QuestKind::Bonus) != file.bonus_area.contains(&q.id) {
                problems.push(MapProblem::GateKind {
                    quest: q.id.clone(),
                    area: "bonus_area",
                });
            }
            if (q.kind == QuestKind::Labkit) != file.labkit_area.contains(&q.id) {
                problems.push(MapProblem::GateKind {
                    quest: q.id.clone(),
                    area: "labkit_area",
                });
            }
        }
        for (area, ids) in [
            ("bonus_area", &file.bonus_area),
            ("labkit_area", &file.labkit_area),
        ] {
            for id in ids.iter().filter(|id| !quests.contains_key(*id)) {
                problems.push(MapProblem::UnknownAreaMember {
                    area,
                    quest: id.clone(),
                });
            }
        }
        for id in file.bonus_area.intersection(&file.labkit_area) {
            problems.push(MapProblem::GateOverlap(id.clone()));
        }

        let gated = |id: &str| file.bonus_area.contains(id) || file.labkit_area.contains(id);
        if !quests
            .values()
            .any(|q| q.prerequisites.is_empty() && !gated(&q.id))
        {
            problems.push(MapProblem::NoStart);
        }
        match quests.get(&file.finish) {
            None => problems.push(MapProblem::Finish(format!(
                "unknown quest {:?}",
                file.finish
            ))),
            Some(_) if gated(&file.finish) => {
                problems.push(MapProblem::Finish(format!("{:?} is gated", file.finish)))
            }
            Some(_) => {}
        }

        let order = match topological_order(&quests) {
            Ok(order) => order,
            Err(cycle) => {
                problems.push(MapProblem::Cycle(cycle));
                Vec::new()
            }
        };

        if !problems.is_empty() {
            return Err(MapValidationError { problems });
        }
        Ok(QuestMap {
            quests,
            order,
            sequences: file.sequences,
            bonus_area: file.bonus_area,
            labkit_area: file.labkit_area,
            finish: file.finish,
        })
    }

    pub fn get(&self, id: &str) -> Option<&QuestNode> {
        self.quests.get(id)
    }

    /// Quests in a prerequisite-respecting order.
    pub fn topological(&self) -> impl Iterator<Item = &QuestNode> {
        self.order.iter().map(|id| &self.quests[id])
    }

    pub fn quests(&self) -> impl Iterator<Item = &QuestNode> {
        self.quests.values()
    }

    pub fn len(&self) -> usize {
        self.quests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quests.is_empty()
    }

    pub fn sequences(&self) -> &[Vec<String>] {
        &self.sequences
    }

    pub fn bonus_area(&self) -> &BTreeSet<String> {
        &self.bonus_area
    }

    pub fn labkit_area(&self) -> &BTreeSet<String> {
        &self.labkit_area
    }

    pub fn finish(&self) -> &str {
        &self.finish
    }

    pub fn is_bonus(&self, id: &str) -> bool {
        self.bonus_area.contains(id)
    }

    pub fn is_labkit(&self, id: &str) -> bool {
        self.labkit_area.contains(id)
    }

    pub fn to_file(&self) -> QuestMapFile {
        QuestMapFile {
            quests: self.quests.values().cloned().collect(),
            sequences: self.sequences.clone(),
            bonus_area: self.bonus_area.clone(),
            labkit_area: self.labkit_area.clone(),
            finish: self.finish.clone(),
        }
    }
}

/// Kahn's algorithm. On failure returns the quests left on or behind a cycle.
fn topological_order(quests: &BTreeMap<String, QuestNode>) -> Result<Vec<String>, Vec<String>> {
    let mut indegree: HashMap<&str, usize> = HashMap::new();
    let mut dependents: HashMap<&str, Vec<&str>> = HashMap::new();
    for q in quests.values() {
        let known = q.prerequisites.iter().filter(|p| quests.contains_key(*p));
        indegree.insert(&q.id, known.clone().count());
        for p in known {
            dependents.entry(p.as_str()).or_default().push(&q.id);
        }
    }
    let mut ready: VecDeque<&str> = quests
        .keys()
        .map(String::as_str)
        .filter(|id| indegree[id] == 0)
        .collect();
    let mut order = Vec::with_capacity(quests.len());
    while let Some(id) = ready.pop_front() {
        order.push(id.to_string());
        for d in dependents.get(id).into_iter().flatten() {
            let n = indegree.get_mut(d).expect("known quest");
            *n -= 1;
            if *n == 0 {
                ready.push_back(d);
            }
        }
    }
    if order.len() == quests.len() {
        Ok(order)
    } else {
        let mut stuck: Vec<String> = indegree
            .into_iter()
            .filter(|&(_, n)| n > 0)
            .map(|(id, _)| id.to_string())
            .collect();
        stuck.sort();
        Err(stuck)
    }
}
