use gaia_core::{
    assess_comfort, led_color_for_temperature, ComfortAssessment, LedColor, Metric, Room,
};
use gaia_store::{Store, StoreError, Target};
use serde::{Deserialize, Serialize};

use crate::config::Dials;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomRings {
    pub temperature: Option<u32>,
    pub humidity: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomStatus {
    pub room_id: String,
    pub name: String,
    /// True when the room has neither a temperature nor a humidity reading.
    pub no_data: bool,
    pub ts: Option<u32>,
    pub temperature: Option<f64>,
    pub humidity: Option<f64>,
    pub led: Option<LedColor>,
    pub comfort: Option<ComfortAssessment>,
    pub rings: RoomRings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRings {
    pub phase_a: u32,
    pub phase_b: u32,
    pub phase_c: u32,
    pub total: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStatus {
    pub ts: u32,
    pub phase_a_w: f64,
    pub phase_b_w: f64,
    pub phase_c_w: f64,
    pub total_w: f64,
    pub rings: PowerRings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingPower {
    pub no_data: bool,
    #[serde(flatten)]
    pub latest: Option<PowerStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildingSummary {
    pub building_id: String,
    pub name: String,
    pub as_of: i64,
    pub rooms: Vec<RoomStatus>,
    /// Absent when no power meter is bound to the building.
    pub power: Option<BuildingPower>,
    pub dials: Dials,
}

pub fn room_status(store: &Store, dials: &Dials, room: &Room) -> Result<RoomStatus, StoreError> {
    let target = Target::Room(room.id.clone());
    let t = store.latest(&target, Metric::Temperature)?;
    let h = store.latest(&target, Metric::Humidity)?;
    let temperature = t.map(|r| r.value);
    let humidity = h.map(|r| r.value);
    let comfort = match (temperature, humidity) {
        (Some(t), Some(h)) => assess_comfort(t, h).ok(),
        _ => None,
    };
    Ok(RoomStatus {
        room_id: room.id.clone(),
        name: room.name.clone(),
        no_data: t.is_none() && h.is_none(),
        ts: t.iter().chain(h.iter()).map(|r| r.ts).max(),
        temperature,
        humidity,
        led: temperature.map(led_color_for_temperature),
        comfort,
        rings: RoomRings {
            temperature: temperature.map(|v| dials.temperature.level(v)),
            humidity: humidity.map(|v| dials.humidity.level(v)),
        },
    })
}

/// Latest per-phase power of a building. `None` when any phase has no data.
pub fn power_status(
    store: &Store,
    dials: &Dials,
    building_id: &str,
) -> Result<Option<PowerStatus>, StoreError> {
    let target = Target::Building(building_id.to_string());
    let mut phases = [0.0; 3];
    let mut ts = 0;
    for (i, m) in Metric::PHASES.iter().enumerate() {
        let Some(r) = store.latest(&target, *m)? else {
            return Ok(None);
        };
        phases[i] = r.value;
        ts = ts.max(r.ts);
    }
    let total = phases.iter().sum::<f64>();
    Ok(Some(PowerStatus {
        ts,
        phase_a_w: phases[0],
        phase_b_w: phases[1],
        phase_c_w: phases[2],
        total_w: total,
        rings: PowerRings {
            phase_a: dials.power.level(phases[0]),
            phase_b: dials.power.level(phases[1]),
            phase_c: dials.power.level(phases[2]),
            total: dials.power.level(total),
        },
    }))
}

pub fn building_summary(
    store: &Store,
    dials: &Dials,
    building_id: &str,
    now: i64,
) -> Result<BuildingSummary, StoreError> {
    let deployment = store.deployment();
    let building = deployment
        .building(building_id)
        .ok_or_else(|| StoreError::NotFound(format!("building {building_id:?}")))?;
    let rooms = deployment
        .rooms_in_building(building_id)
        .into_iter()
        .map(|room| room_status(store, dials, room))
        .collect::<Result<Vec<_>, _>>()?;
    let power = if deployment.power_meters(building_id).is_empty() {
        None
    } else {
        let latest = power_status(store, dials, building_id)?;
        Some(BuildingPower {
            no_data: latest.is_none(),
            latest,
        })
    };
    Ok(BuildingSummary {
        building_id: building.id.clone(),
        name: building.name.clone(),
        as_of: now,
        rooms,
        power,
        dials: *dials,
    })
}
