//! Generative model for classroom and power-meter readings.
//!
//! Every random draw comes from a ChaCha stream selected by
//! `(seed, node_id, tag, counter)`, so a sample depends only on those inputs
//! and never on the order in which samples are taken.

use std::collections::HashMap;
use std::f64::consts::PI;

use gaia_core::{Binding, Deployment, Metric, NodeDescriptor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::config::Occupancy;
use crate::SimError;

pub const BASE_LOAD_W: f64 = 800.0;
pub const LOAD_PER_OCCUPIED_ROOM_W: f64 = 350.0;
/// Percentage split of building load across phases A, B, C.
pub const PHASE_SPLIT_PCT: [f64; 3] = [40.0, 35.0, 25.0];
const POWER_NOISE_SD_W: f64 = 25.0;

/// Stream tags beyond the metric codes.
pub(crate) const TAG_POWER_TOTAL: u8 = 0x20;
pub(crate) const TAG_FAULT_DROP: u8 = 0xF1;
pub(crate) const TAG_FAULT_CORRUPT: u8 = 0xF2;
pub(crate) const TAG_FAULT_DUPLICATE: u8 = 0xF3;
pub(crate) const TAG_CORRUPT_POS: u8 = 0xF4;

pub(crate) fn stream(seed: u64, node_id: u16, tag: u8, counter: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((node_id as u64) << 40) | ((tag as u64) << 32) | counter as u64);
    rng
}

/// Seconds since local midnight as fractional hours, and weekday (0 = Monday).
fn clock(ts: u32) -> (f64, u32) {
    let days = ts / 86_400;
    let hour = (ts % 86_400) as f64 / 3600.0;
    // 1970-01-01 was a Thursday
    (hour, (days + 3) % 7)
}

pub fn outdoor_temperature(ts: u32) -> f64 {
    let (h, _) = clock(ts);
    12.0 + 6.0 * (2.0 * PI * (h - 9.0) / 24.0).sin()
}

#[derive(Debug, Clone)]
pub struct Model {
    seed: u64,
    occupancy: Occupancy,
    noise: bool,
    rooms_per_building: HashMap<String, usize>,
}

impl Model {
    pub fn new(seed: u64, occupancy: Occupancy, deployment: &Deployment) -> Self {
        let rooms_per_building = deployment
            .topology
            .buildings
            .iter()
            .map(|b| (b.id.clone(), deployment.rooms_in_building(&b.id).len()))
            .collect();
        Model {
            seed,
            occupancy,
            noise: true,
            rooms_per_building,
        }
    }

    /// Disables the random terms, leaving the deterministic part of the model.
    pub fn without_noise(mut self) -> Self {
        self.noise = false;
        self
    }

    pub fn is_occupied(&self, ts: u32) -> bool {
        let (h, weekday) = clock(ts);
        weekday < 5 && h >= self.occupancy.start_hour as f64 && h < self.occupancy.end_hour as f64
    }

    fn gaussian(&self, node_id: u16, tag: u8, ts: u32, sd: f64) -> f64 {
        if !self.noise {
            return 0.0;
        }
        let mut rng = stream(self.seed, node_id, tag, ts);
        Normal::new(0.0, sd).expect("positive sd").sample(&mut rng)
    }

    /// Total building load and its phase split, before wire rounding.
    pub fn building_power(&self, node: &NodeDescriptor, ts: u32) -> (f64, [f64; 3]) {
        let rooms = match &node.binding {
            Binding::Building(b) => self.rooms_per_building.get(b).copied().unwrap_or(0),
            Binding::Room(_) => 1,
        };
        let occupied = if self.is_occupied(ts) { rooms } else { 0 };
        let total = (BASE_LOAD_W
            + LOAD_PER_OCCUPIED_ROOM_W * occupied as f64
            + self.gaussian(node.node_id, TAG_POWER_TOTAL, ts, POWER_NOISE_SD_W))
        .max(0.0);
        let phases = PHASE_SPLIT_PCT.map(|pct| total * pct / 100.0);
        (total, phases)
    }

    pub fn sample_metric(
        &self,
        node: &NodeDescriptor,
        metric: Metric,
        ts: u32,
    ) -> Result<f64, SimError> {
        if !node.metrics.contains(&metric) {
            return Err(SimError::MetricNotOnNode {
                node_id: node.node_id,
                metric,
            });
        }
        let occupied = self.is_occupied(ts);
        let occ = if occupied { 1.0 } else { 0.0 };
        let id = node.node_id;
        let value = match metric {
            Metric::Temperature => {
                0.7 * 21.0
                    + 0.3 * outdoor_temperature(ts)
                    + 1.5 * occ
                    + self.gaussian(id, metric.code(), ts, 0.2)
            }
            Metric::Humidity => 45.0 + 10.0 * occ + self.gaussian(id, metric.code(), ts, 1.0),
            Metric::Noise => {
                let (lo, hi) = if occupied {
                    (300.0, 700.0)
                } else {
                    (50.0, 150.0)
                };
                if self.noise {
                    stream(self.seed, id, metric.code(), ts).random_range(lo..=hi)
                } else {
                    (lo + hi) / 2.0
                }
            }
            Metric::Motion => {
                if !occupied {
                    0.0
                } else if self.noise {
                    let mut rng = stream(self.seed, id, metric.code(), ts);
                    Poisson::new(5.0).expect("positive rate").sample(&mut rng)
                } else {
                    5.0
                }
            }
            Metric::PowerPhaseA | Metric::PowerPhaseB | Metric::PowerPhaseC => {
                let (_, phases) = self.building_power(node, ts);
                let idx = (metric.code() - Metric::PowerPhaseA.code()) as usize;
                phases[idx]
            }
        };
        let (lo, hi) = metric.range();
        Ok(value.clamp(lo, hi))
    }
}
