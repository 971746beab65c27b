//! Mappings from readings to the lab-kit peripherals: comfort bands, the
//! two-colour room LEDs and the LED-ring dials.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, RangeError};
use crate::metric::Metric;

/// Rooms strictly above this temperature light red.
pub const LED_RED_ABOVE_C: f64 = 25.0;
pub const DEFAULT_RING_LEDS: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thermal {
    TooCold,
    Comfortable,
    TooWarm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hygric {
    TooDry,
    Ok,
    TooHumid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComfortAssessment {
    pub thermal: Thermal,
    pub hygric: Hygric,
}

/// Inclusive comfort bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortBands {
    pub temp_min_c: f64,
    pub temp_max_c: f64,
    pub rh_min_pct: f64,
    pub rh_max_pct: f64,
}

impl Default for ComfortBands {
    fn default() -> Self {
        ComfortBands {
            temp_min_c: 20.0,
            temp_max_c: 26.0,
            rh_min_pct: 30.0,
            rh_max_pct: 70.0,
        }
    }
}

impl ComfortBands {
    pub fn thermal(&self, temp_c: f64) -> Thermal {
        if temp_c < self.temp_min_c {
            Thermal::TooCold
        } else if temp_c > self.temp_max_c {
            Thermal::TooWarm
        } else {
            Thermal::Comfortable
        }
    }

    pub fn hygric(&self, rh_pct: f64) -> Hygric {
        if rh_pct < self.rh_min_pct {
            Hygric::TooDry
        } else if rh_pct > self.rh_max_pct {
            Hygric::TooHumid
        } else {
            Hygric::Ok
        }
    }

    pub fn assess(&self, temp_c: f64, rh_pct: f64) -> Result<ComfortAssessment, RangeError> {
        check(Metric::Temperature, temp_c)?;
        check(Metric::Humidity, rh_pct)?;
        Ok(ComfortAssessment {
            thermal: self.thermal(temp_c),
            hygric: self.hygric(rh_pct),
        })
    }
}

fn check(metric: Metric, value: f64) -> Result<(), RangeError> {
    if metric.contains(value) {
        Ok(())
    } else {
        let (min, max) = metric.range();
        Err(RangeError {
            metric,
            value,
            min,
            max,
        })
    }
}

/// Comfort assessment against the default bands.
pub fn assess_comfort(temp_c: f64, rh_pct: f64) -> Result<ComfortAssessment, RangeError> {
    ComfortBands::default().assess(temp_c, rh_pct)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedColor {
    Green,
    Red,
}

pub fn led_color_for_temperature(temp_c: f64) -> LedColor {
    if temp_c > LED_RED_ABOVE_C {
        LedColor::Red
    } else {
        LedColor::Green
    }
}

/// Number of lit LEDs on a ring dial spanning `lo..hi`, rounded half up.
pub fn ring_level(value: f64, lo: f64, hi: f64, n_leds: u32) -> Result<u32, ConfigError> {
    if !(lo < hi) {
        return Err(ConfigError::new(format!("dial range {lo}..{hi} is empty")));
    }
    if n_leds == 0 {
        return Err(ConfigError::new("ring needs at least one LED"));
    }
    let frac = ((value - lo) / (hi - lo)).clamp(0.0, 1.0);
    if frac.is_nan() {
        return Ok(0);
    }
    let lit = (n_leds as f64 * frac + 0.5).floor() as u32;
    Ok(lit.min(n_leds))
}

/// A configured dial: value range and ring size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dial {
    pub lo: f64,
    pub hi: f64,
    pub n_leds: u32,
}

impl Dial {
    pub fn new(lo: f64, hi: f64, n_leds: u32) -> Result<Self, ConfigError> {
        // validates the range once up front
        ring_level(lo, lo, hi, n_leds)?;
        Ok(Dial { lo, hi, n_leds })
    }

    pub fn level(&self, value: f64) -> u32 {
        ring_level(value, self.lo, self.hi, self.n_leds).expect("dial validated at construction")
    }
}
