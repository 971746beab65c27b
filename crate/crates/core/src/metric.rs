use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::RangeError;

/// A measured quantity, identified on the wire by a one-byte code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Temperature,
    Humidity,
    Noise,
    Motion,
    PowerPhaseA,
    PowerPhaseB,
    PowerPhaseC,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Temperature,
        Metric::Humidity,
        Metric::Noise,
        Metric::Motion,
        Metric::PowerPhaseA,
        Metric::PowerPhaseB,
        Metric::PowerPhaseC,
    ];

    pub const CLASSROOM: [Metric; 4] = [
        Metric::Temperature,
        Metric::Humidity,
        Metric::Noise,
        Metric::Motion,
    ];

    pub const PHASES: [Metric; 3] = [
        Metric::PowerPhaseA,
        Metric::PowerPhaseB,
        Metric::PowerPhaseC,
    ];

    pub fn code(self) -> u8 {
        match self {
            Metric::Temperature => 0x01,
            Metric::Humidity => 0x02,
            Metric::Noise => 0x03,
            Metric::Motion => 0x04,
            Metric::PowerPhaseA => 0x10,
            Metric::PowerPhaseB => 0x11,
            Metric::PowerPhaseC => 0x12,
        }
    }

    pub fn from_code(code: u8) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.code() == code)
    }

    /// Lowercase name used in JSON and query strings.
    pub fn name(self) -> &'static str {
        match self {
            Metric::Temperature => "temperature",
            Metric::Humidity => "humidity",
            Metric::Noise => "noise",
            Metric::Motion => "motion",
            Metric::PowerPhaseA => "power_phase_a",
            Metric::PowerPhaseB => "power_phase_b",
            Metric::PowerPhaseC => "power_phase_c",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Metric::Temperature => "°C",
            Metric::Humidity => "%RH",
            Metric::Noise => "level",
            Metric::Motion => "events",
            Metric::PowerPhaseA | Metric::PowerPhaseB | Metric::PowerPhaseC => "W",
        }
    }

    /// Multiplier from engineering units to the wire integer.
    pub fn wire_scale(self) -> i32 {
        match self {
            Metric::Temperature | Metric::Humidity => 100,
            _ => 1,
        }
    }

    /// Only temperature travels as a signed 16-bit value; everything else is unsigned.
    pub fn is_signed(self) -> bool {
        matches!(self, Metric::Temperature)
    }

    /// Inclusive range in engineering units.
    pub fn range(self) -> (f64, f64) {
        match self {
            Metric::Temperature => (-40.0, 85.0),
            Metric::Humidity => (0.0, 100.0),
            Metric::Noise => (0.0, 1023.0),
            Metric::Motion => (0.0, 1000.0),
            Metric::PowerPhaseA | Metric::PowerPhaseB | Metric::PowerPhaseC => (0.0, 65535.0),
        }
    }

    pub fn is_power(self) -> bool {
        matches!(
            self,
            Metric::PowerPhaseA | Metric::PowerPhaseB | Metric::PowerPhaseC
        )
    }

    pub fn contains(self, value: f64) -> bool {
        let (lo, hi) = self.range();
        value >= lo && value <= hi
    }

    fn check(self, value: f64) -> Result<(), RangeError> {
        if self.contains(value) {
            Ok(())
        } else {
            let (min, max) = self.range();
            Err(RangeError {
                metric: self,
                value,
                min,
                max,
            })
        }
    }

    /// Scales an engineering value to its wire integer, rounding half away from zero.
    pub fn to_wire(self, value: f64) -> Result<i32, RangeError> {
        self.check(value)?;
        // f64::round is half-away-from-zero
        Ok((value * self.wire_scale() as f64).round() as i32)
    }

    pub fn from_wire(self, wire: i32) -> Result<f64, RangeError> {
        let value = wire as f64 / self.wire_scale() as f64;
        self.check(value)?;
        Ok(value)
    }

    /// Whether `wire` fits the 16-bit field this metric uses on the wire.
    pub fn wire_fits(self, wire: i32) -> bool {
        if self.is_signed() {
            i16::try_from(wire).is_ok()
        } else {
            u16::try_from(wire).is_ok()
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metric {0:?}")]
pub struct UnknownMetric(pub String);

impl FromStr for Metric {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| UnknownMetric(s.to_string()))
    }
}
