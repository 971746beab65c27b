//! On-disk layout of a storage directory and the services opened from it.
//!
//! ```text
//! <storage>/deployment.json      topology and node descriptors
//! <storage>/roster.json          schools, classes, students, teachers
//! <storage>/quest_map.json       challenge definition
//! <storage>/telemetry/segments/  reading log
//! <storage>/challenge/events.log challenge journal
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono_tz::Tz;
use gaia_challenge::{ChallengeError, Engine, QuestMap, Roster};
use gaia_core::Deployment;
use gaia_store::{Store, StoreConfig, StoreError};

pub const DEPLOYMENT_FILE: &str = "deployment.json";
pub const ROSTER_FILE: &str = "roster.json";
pub const QUEST_MAP_FILE: &str = "quest_map.json";
pub const TELEMETRY_DIR: &str = "telemetry";
pub const JOURNAL_FILE: &str = "challenge/events.log";

#[derive(Debug, thiserror::Error)]
pub enum OpenError {
    #[error("{} not found (run `gaia seed-demo` or provide it)", .0.display())]
    Missing(PathBuf),
    #[error("{path}: {message}", path = .path.display())]
    Invalid { path: PathBuf, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Challenge(#[from] ChallengeError),
}

pub struct Platform {
    pub store: Arc<Store>,
    pub engine: Arc<Engine>,
}

pub fn load_deployment(path: &Path) -> Result<Deployment, OpenError> {
    let text = read(path)?;
    let d: Deployment = serde_json::from_str(&text).map_err(|e| OpenError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    d.validate().map_err(|e| OpenError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(d)
}

fn read(path: &Path) -> Result<String, OpenError> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => OpenError::Missing(path.to_path_buf()),
        _ => OpenError::Invalid {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
    })
}

/// Opens the store and the challenge engine of `dir`, replaying both logs.
pub fn open_platform(dir: &Path, timezone: Tz) -> Result<Platform, OpenError> {
    let deployment = load_deployment(&dir.join(DEPLOYMENT_FILE))?;
    let roster_path = dir.join(ROSTER_FILE);
    let roster = Roster::from_json(&read(&roster_path)?).map_err(|e| OpenError::Invalid {
        path: roster_path,
        message: e.to_string(),
    })?;
    let map_path = dir.join(QUEST_MAP_FILE);
    let map = QuestMap::from_json(&read(&map_path)?).map_err(|e| OpenError::Invalid {
        path: map_path,
        message: e.to_string(),
    })?;

    let config = StoreConfig {
        timezone,
        ..StoreConfig::default()
    };
    let store = Store::open(&dir.join(TELEMETRY_DIR), Arc::new(deployment), config)?;
    let engine = Engine::open(map, roster, &dir.join(JOURNAL_FILE))?;
    Ok(Platform {
        store: Arc::new(store),
        engine: Arc::new(engine),
    })
}
