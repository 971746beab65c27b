//! The school challenge: a quest map traversed by students, class activities
//! run by teachers, bonus and lab-kit gating, an award ledger and the
//! community dashboard. State changes are journaled one JSON event per line.

pub mod demo;
pub mod engine;
pub mod map;
pub mod roster;

use gaia_core::linelog::LogError;
use thiserror::Error;

pub use engine::{
    resolve_live_answer, ActivityState, Answer, AnswerOutcome, Award, ClassActivity, ClassStanding,
    Engine, LiveData, Scope, Snapshot, StudentStanding, DASHBOARD_SNAPSHOTS, MAX_SNAPSHOT_CHARS,
};
pub use map::{
    MapProblem, MapValidationError, Payload, QuestKind, QuestMap, QuestMapFile, QuestNode, Reduce,
};
pub use roster::{Class, Roster, RosterFile, School, Student, Teacher};

#[derive(Debug, Error)]
pub enum ChallengeError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("not available: {0}")]
    Gate(String),
    #[error("not permitted: {0}")]
    Authz(String),
    #[error("invalid transition: {0}")]
    State(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("cannot resolve answer: {0}")]
    Unresolvable(String),
    #[error(transparent)]
    Map(#[from] MapValidationError),
    #[error("journal: {0}")]
    Journal(#[from] LogError),
}
