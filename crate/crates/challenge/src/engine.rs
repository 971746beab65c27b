use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use gaia_core::linelog::{self, LineLog};
use gaia_core::Metric;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::map::{Payload, QuestKind, QuestMap, QuestNode, Reduce};
use crate::roster::Roster;
use crate::ChallengeError;

pub const MAX_SNAPSHOT_CHARS: usize = 500;
pub const DASHBOARD_SNAPSHOTS: usize = 20;

/// Read access to current sensor values for live-data quests.
pub trait LiveData {
    /// Room ids of a building, or `None` if the building is unknown.
    fn room_ids(&self, building_id: &str) -> Option<Vec<String>>;
    fn latest(&self, room_id: &str, metric: Metric) -> Option<f64>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Choice(usize),
    Room(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    pub correct: bool,
    pub points_awarded: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityState {
    PartA,
    PartB,
    PartC,
    Complete,
}

impl ActivityState {
    pub fn next(self) -> Option<ActivityState> {
        match self {
            ActivityState::PartA => Some(ActivityState::PartB),
            ActivityState::PartB => Some(ActivityState::PartC),
            ActivityState::PartC => Some(ActivityState::Complete),
            ActivityState::Complete => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassActivity {
    pub id: String,
    pub class_id: String,
    pub teacher_id: String,
    pub topic: String,
    pub state: ActivityState,
    pub started_ts: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Award {
    pub student_id: String,
    pub quest_id: String,
    pub points: u32,
    pub ts: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub student_id: String,
    pub class_id: String,
    pub ts: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_id: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Event {
    Award(Award),
    ActivityStarted(ClassActivity),
    ActivityAdvanced {
        activity_id: String,
        state: ActivityState,
        ts: i64,
    },
    LabkitUnlocked {
        class_id: String,
        teacher_id: String,
        ts: i64,
    },
    Snapshot(Snapshot),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Global,
    School(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentStanding {
    pub student_id: String,
    pub name: String,
    pub points: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStanding {
    pub rank: usize,
    pub class_id: String,
    pub class_name: String,
    pub school_id: String,
    pub score: u64,
    /// When the class reached its current score; `None` while it is zero.
    pub reached_ts: Option<i64>,
    pub students: Vec<StudentStanding>,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Default)]
struct State {
    awards: HashMap<(String, String), Award>,
    ledger: Vec<Award>,
    activities: BTreeMap<String, ClassActivity>,
    participating: HashSet<String>,
    unlocked: HashSet<String>,
    snapshots: Vec<Snapshot>,
    next_activity: u64,
    next_snapshot: u64,
    journal: Option<LineLog>,
}

impl State {
    fn apply(&mut self, event: Event) {
        match event {
            Event::Award(a) => {
                let key = (a.student_id.clone(), a.quest_id.clone());
                if let std::collections::hash_map::Entry::Vacant(e) = self.awards.entry(key) {
                    e.insert(a.clone());
                    self.ledger.push(a);
                }
            }
            Event::ActivityStarted(act) => {
                self.next_activity += 1;
                self.participating.insert(act.class_id.clone());
                self.activities.insert(act.id.clone(), act);
            }
            Event::ActivityAdvanced {
                activity_id, state, ..
            } => {
                if let Some(act) = self.activities.get_mut(&activity_id) {
                    act.state = state;
                }
            }
            Event::LabkitUnlocked { class_id, .. } => {
                self.unlocked.insert(class_id);
            }
            Event::Snapshot(s) => {
                self.next_snapshot += 1;
                self.snapshots.push(s);
            }
        }
    }

    fn commit(&mut self, event: Event) -> Result<(), ChallengeError> {
        if let Some(journal) = self.journal.as_mut() {
            journal.append(std::slice::from_ref(&event))?;
        }
        self.apply(event);
        Ok(())
    }
}

/// Challenge state over a fixed quest map and roster.
///
/// Writes hold one lock while journaling and applying an event, so awards are
/// atomic per (student, quest) and readers see a consistent prefix.
pub struct Engine {
    map: QuestMap,
    roster: Roster,
    state: RwLock<State>,
}

impl Engine {
    /// Engine without persistence.
    pub fn in_memory(map: QuestMap, roster: Roster) -> Self {
        Engine {
            map,
            roster,
            state: RwLock::new(State::default()),
        }
    }

    /// Opens or creates the event journal at `path` and replays it. A torn
    /// final line from an interrupted write is discarded.
    pub fn open(map: QuestMap, roster: Roster, path: &Path) -> Result<Self, ChallengeError> {
        let mut state = State::default();
        let valid_len = if path.exists() {
            let replayed = linelog::replay::<Event>(path, true)?;
            for e in replayed.records {
                state.apply(e);
            }
            replayed.valid_len
        } else {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|source| linelog::LogError::Io {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            0
        };
        state.journal = Some(LineLog::open(path, valid_len)?);
        Ok(Engine {
            map,
            roster,
            state: RwLock::new(state),
        })
    }

    pub fn map(&self) -> &QuestMap {
        &self.map
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    fn class_id_of(&self, student_id: &str) -> Result<&str, ChallengeError> {
        self.roster
            .class_of(student_id)
            .map(|(_, c)| c.id.as_str())
            .ok_or_else(|| ChallengeError::NotFound(format!("student {student_id:?}")))
    }

    fn quest(&self, quest_id: &str) -> Result<&QuestNode, ChallengeError> {
        self.map
            .get(quest_id)
            .ok_or_else(|| ChallengeError::NotFound(format!("quest {quest_id:?}")))
    }

    fn gate_open(&self, state: &State, class_id: &str, quest_id: &str) -> bool {
        if self.map.is_bonus(quest_id) {
            state.participating.contains(class_id)
        } else if self.map.is_labkit(quest_id) {
            state.unlocked.contains(class_id)
        } else {
            true
        }
    }

    fn visible(&self, state: &State, student_id: &str, class_id: &str, quest: &QuestNode) -> bool {
        self.gate_open(state, class_id, &quest.id)
            && quest.prerequisites.iter().all(|p| {
                state
                    .awards
                    .contains_key(&(student_id.to_string(), p.clone()))
            })
    }

    /// Quest ids the student may answer now, in prerequisite order.
    pub fn visible_quests(&self, student_id: &str) -> Result<Vec<String>, ChallengeError> {
        let class_id = self.class_id_of(student_id)?;
        let state = self.state.read();
        Ok(self
            .map
            .topological()
            .filter(|q| self.visible(&state, student_id, class_id, q))
            .map(|q| q.id.clone())
            .collect())
    }

    pub fn answer_quest(
        &self,
        student_id: &str,
        quest_id: &str,
        answer: &Answer,
        now: i64,
        live: &dyn LiveData,
    ) -> Result<AnswerOutcome, ChallengeError> {
        let quest = self.quest(quest_id)?;
        let class_id = self.class_id_of(student_id)?;
        if !self.visible(&self.state.read(), student_id, class_id, quest) {
            return Err(ChallengeError::Gate(format!(
                "quest {quest_id:?} is not available to {student_id:?}"
            )));
        }
        let correct = match (&quest.payload, answer) {
            (Payload::Quiz { correct_index, .. }, Answer::Choice(i)) => i == correct_index,
            (Payload::LiveData { .. }, Answer::Room(room)) => {
                *room == resolve_live_answer(quest, live)?
            }
            (Payload::Quiz { .. }, Answer::Room(_)) => {
                return Err(ChallengeError::Validation(
                    "quiz answers are choice indices".into(),
                ))
            }
            (Payload::LiveData { .. }, Answer::Choice(_)) => {
                return Err(ChallengeError::Validation(
                    "live-data answers are room ids".into(),
                ))
            }
        };
        if !correct {
            return Ok(AnswerOutcome {
                correct: false,
                points_awarded: 0,
            });
        }
        // visibility only ever widens, so the check above still holds
        let mut state = self.state.write();
        if state
            .awards
            .contains_key(&(student_id.to_string(), quest_id.to_string()))
        {
            return Ok(AnswerOutcome {
                correct: true,
                points_awarded: 0,
            });
        }
        let award = Award {
            student_id: student_id.to_string(),
            quest_id: quest_id.to_string(),
            points: quest.points,
            ts: now,
        };
        state.commit(Event::Award(award))?;
        Ok(AnswerOutcome {
            correct: true,
            points_awarded: quest.points,
        })
    }

    pub fn start_class_activity(
        &self,
        teacher_id: &str,
        class_id: &str,
        topic: &str,
        now: i64,
    ) -> Result<ClassActivity, ChallengeError> {
        self.check_teacher(teacher_id, class_id)?;
        let mut state = self.state.write();
        let act = ClassActivity {
            id: format!("act-{:06}", state.next_activity + 1),
            class_id: class_id.to_string(),
            teacher_id: teacher_id.to_string(),
            topic: topic.to_string(),
            state: ActivityState::PartA,
            started_ts: now,
        };
        state.commit(Event::ActivityStarted(act.clone()))?;
        Ok(act)
    }

    pub fn advance_class_activity(
        &self,
        activity_id: &str,
        teacher_id: &str,
        now: i64,
    ) -> Result<ClassActivity, ChallengeError> {
        let mut state = self.state.write();
        let act = state
            .activities
            .get(activity_id)
            .ok_or_else(|| ChallengeError::NotFound(format!("activity {activity_id:?}")))?;
        if act.teacher_id != teacher_id {
            return Err(ChallengeError::Authz(format!(
                "{teacher_id:?} does not own activity {activity_id:?}"
            )));
        }
        let next = act.state.next().ok_or_else(|| {
            ChallengeError::State(format!("activity {activity_id:?} is already complete"))
        })?;
        state.commit(Event::ActivityAdvanced {
            activity_id: activity_id.to_string(),
            state: next,
            ts: now,
        })?;
        Ok(state.activities[activity_id].clone())
    }

    pub fn unlock_labkit_quests(
        &self,
        teacher_id: &str,
        class_id: &str,
        now: i64,
    ) -> Result<(), ChallengeError> {
        self.check_teacher(teacher_id, class_id)?;
        let mut state = self.state.write();
        if state.unlocked.contains(class_id) {
            return Ok(());
        }
        state.commit(Event::LabkitUnlocked {
            class_id: class_id.to_string(),
            teacher_id: teacher_id.to_string(),
            ts: now,
        })
    }

    fn check_teacher(&self, teacher_id: &str, class_id: &str) -> Result<(), ChallengeError> {
        if self.roster.class(class_id).is_none() {
            return Err(ChallengeError::NotFound(format!("class {class_id:?}")));
        }
        if !self.roster.teaches(teacher_id, class_id) {
            return Err(ChallengeError::Authz(format!(
                "{teacher_id:?} is not bound to class {class_id:?}"
            )));
        }
        Ok(())
    }

    pub fn submit_snapshot(
        &self,
        student_id: &str,
        text: &str,
        room_id: Option<&str>,
        now: i64,
    ) -> Result<Snapshot, ChallengeError> {
        let class_id = self.class_id_of(student_id)?.to_string();
        let chars = text.chars().count();
        if chars > MAX_SNAPSHOT_CHARS {
            return Err(ChallengeError::Validation(format!(
                "snapshot text has {chars} characters, limit {MAX_SNAPSHOT_CHARS}"
            )));
        }
        if text.trim().is_empty() {
            return Err(ChallengeError::Validation("snapshot text is empty".into()));
        }
        let mut state = self.state.write();
        let snap = Snapshot {
            id: format!("snap-{:06}", state.next_snapshot + 1),
            student_id: student_id.to_string(),
            class_id,
            ts: now,
            room_id: room_id.map(str::to_string),
            text: text.to_string(),
        };
        state.commit(Event::Snapshot(snap.clone()))?;
        Ok(snap)
    }

    pub fn class_score(&self, class_id: &str) -> Result<u64, ChallengeError> {
        let (_, class) = self
            .roster
            .class(class_id)
            .ok_or_else(|| ChallengeError::NotFound(format!("class {class_id:?}")))?;
        let members: HashSet<&str> = class.students.iter().map(|s| s.id.as_str()).collect();
        let state = self.state.read();
        Ok(state
            .ledger
            .iter()
            .filter(|a| members.contains(a.student_id.as_str()))
            .map(|a| a.points as u64)
            .sum())
    }

    pub fn student_points(&self, student_id: &str) -> Result<u64, ChallengeError> {
        self.class_id_of(student_id)?;
        let state = self.state.read();
        Ok(state
            .ledger
            .iter()
            .filter(|a| a.student_id == student_id)
            .map(|a| a.points as u64)
            .sum())
    }

    /// Quests the student has answered correctly.
    pub fn answered_quests(&self, student_id: &str) -> Result<BTreeSet<String>, ChallengeError> {
        self.class_id_of(student_id)?;
        let state = self.state.read();
        Ok(state
            .ledger
            .iter()
            .filter(|a| a.student_id == student_id)
            .map(|a| a.quest_id.clone())
            .collect())
    }

    /// Newest first, at most `limit`.
    pub fn snapshots_of(
        &self,
        class_id: &str,
        limit: usize,
    ) -> Result<Vec<Snapshot>, ChallengeError> {
        if self.roster.class(class_id).is_none() {
            return Err(ChallengeError::NotFound(format!("class {class_id:?}")));
        }
        let state = self.state.read();
        Ok(newest_snapshots(
            state.snapshots.iter().filter(|s| s.class_id == class_id),
            limit,
        ))
    }

    pub fn ledger(&self) -> Vec<Award> {
        self.state.read().ledger.clone()
    }

    pub fn activity(&self, id: &str) -> Option<ClassActivity> {
        self.state.read().activities.get(id).cloned()
    }

    pub fn activities_of(&self, class_id: &str) -> Vec<ClassActivity> {
        self.state
            .read()
            .activities
            .values()
            .filter(|a| a.class_id == class_id)
            .cloned()
            .collect()
    }

    pub fn labkit_unlocked(&self, class_id: &str) -> bool {
        self.state.read().unlocked.contains(class_id)
    }

    /// Classes ranked by score, then by who reached their score first, then
    /// by class id.
    pub fn dashboard(&self, scope: &Scope) -> Result<Vec<ClassStanding>, ChallengeError> {
        if let Scope::School(id) = scope {
            if self.roster.school(id).is_none() {
                return Err(ChallengeError::NotFound(format!("school {id:?}")));
            }
        }
        let state = self.state.read();
        let mut per_student: HashMap<&str, (u64, Option<i64>)> = HashMap::new();
        for a in &state.ledger {
            let e = per_student.entry(&a.student_id).or_default();
            e.0 += a.points as u64;
            if a.points > 0 {
                e.1 = e.1.max(Some(a.ts));
            }
        }
        let mut out = Vec::new();
        for (school, class) in self.roster.classes() {
            if matches!(scope, Scope::School(id) if *id != school.id) {
                continue;
            }
            let mut students: Vec<StudentStanding> = class
                .students
                .iter()
                .map(|s| StudentStanding {
                    student_id: s.id.clone(),
                    name: s.name.clone(),
                    points: per_student.get(s.id.as_str()).map_or(0, |e| e.0),
                })
                .collect();
            students.sort_by(|a, b| {
                b.points
                    .cmp(&a.points)
                    .then_with(|| a.student_id.cmp(&b.student_id))
            });
            let reached_ts = class
                .students
                .iter()
                .filter_map(|s| per_student.get(s.id.as_str()).and_then(|e| e.1))
                .max();
            let snapshots = newest_snapshots(
                state.snapshots.iter().filter(|s| s.class_id == class.id),
                DASHBOARD_SNAPSHOTS,
            );
            out.push(ClassStanding {
                rank: 0,
                class_id: class.id.clone(),
                class_name: class.name.clone(),
                school_id: school.id.clone(),
                score: students.iter().map(|s| s.points).sum(),
                reached_ts,
                students,
                snapshots,
            });
        }
        out.sort_by(|a, b| {
            b.score
                .cmp(&a.score)
                .then_with(|| a.reached_ts.cmp(&b.reached_ts))
                .then_with(|| a.class_id.cmp(&b.class_id))
        });
        for (i, c) in out.iter_mut().enumerate() {
            c.rank = i + 1;
        }
        Ok(out)
    }
}

fn newest_snapshots<'a>(snaps: impl Iterator<Item = &'a Snapshot>, limit: usize) -> Vec<Snapshot> {
    let mut out: Vec<Snapshot> = snaps.cloned().collect();
    out.sort_by(|a, b| b.ts.cmp(&a.ts).then_with(|| b.id.cmp(&a.id)));
    out.truncate(limit);
    out
}

/// Canonical answer of a live-data quest: the room of the target building
/// with the highest (or lowest) latest value. Ties go to the smallest room id;
/// rooms without data are skipped.
pub fn resolve_live_answer(
    quest: &QuestNode,
    live: &dyn LiveData,
) -> Result<String, ChallengeError> {
    let Payload::LiveData {
        target,
        metric,
        reduce,
        ..
    } = &quest.payload
    else {
        return Err(ChallengeError::Validation(format!(
            "quest {:?} is not a live-data quest",
            quest.id
        )));
    };
    debug_assert_eq!(quest.kind, QuestKind::LiveData);
    let mut rooms = live
        .room_ids(target)
        .ok_or_else(|| ChallengeError::Unresolvable(format!("unknown building {target:?}")))?;
    rooms.sort();
    let mut best: Option<(String, f64)> = None;
    for room in rooms {
        let Some(v) = live.latest(&room, *metric).filter(|v| v.is_finite()) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((_, b)) => match reduce {
                Reduce::ArgmaxRoom => v > *b,
                Reduce::ArgminRoom => v < *b,
            },
        };
        if better {
            best = Some((room, v));
        }
    }
    best.map(|(room, _)| room).ok_or_else(|| {
        ChallengeError::Unresolvable(format!("no {metric} data in building {target:?}"))
    })
}
