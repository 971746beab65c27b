use std::net::SocketAddr;
use std::path::PathBuf;

use chrono_tz::Tz;
use gaia_core::viz::DEFAULT_RING_LEDS;
use gaia_core::{ConfigError, Dial};
use serde::Serialize;

/// Ranges of the three LED-ring dials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dials {
    pub power: Dial,
    pub temperature: Dial,
    pub humidity: Dial,
}

impl Default for Dials {
    fn default() -> Self {
        Dials {
            power: Dial {
                lo: 0.0,
                hi: 3000.0,
                n_leds: DEFAULT_RING_LEDS,
            },
            temperature: Dial {
                lo: 15.0,
                hi: 30.0,
                n_leds: DEFAULT_RING_LEDS,
            },
            humidity: Dial {
                lo: 0.0,
                hi: 100.0,
                n_leds: DEFAULT_RING_LEDS,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub listen: SocketAddr,
    pub storage: PathBuf,
    pub gateway_token: String,
    pub timezone: Tz,
    pub dials: Dials,
    /// Directory served under `/app`, if any.
    pub static_dir: Option<PathBuf>,
}

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_STORAGE: &str = "gaia-data";
pub const DEFAULT_GATEWAY_TOKEN: &str = "gaia-dev-token";

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            listen: DEFAULT_LISTEN.parse().expect("valid default address"),
            storage: PathBuf::from(DEFAULT_STORAGE),
            gateway_token: DEFAULT_GATEWAY_TOKEN.to_string(),
            timezone: Tz::UTC,
            dials: Dials::default(),
            static_dir: None,
        }
    }
}

impl ApiConfig {
    /// Reads `GAIA_LISTEN`, `GAIA_STORAGE`, `GAIA_GATEWAY_TOKEN`, `GAIA_TZ`,
    /// `GAIA_DIAL_POWER`, `GAIA_DIAL_TEMPERATURE`, `GAIA_DIAL_HUMIDITY`
    /// (each `lo:hi:leds`) and `GAIA_STATIC_DIR`. Unset variables keep defaults.
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut cfg = ApiConfig::default();
        if let Some(v) = get("GAIA_LISTEN") {
            cfg.listen = v
                .parse()
                .map_err(|e| ConfigError::new(format!("GAIA_LISTEN {v:?}: {e}")))?;
        }
        if let Some(v) = get("GAIA_STORAGE") {
            cfg.storage = PathBuf::from(v);
        }
        if let Some(v) = get("GAIA_GATEWAY_TOKEN") {
            if v.is_empty() {
                return Err(ConfigError::new("GAIA_GATEWAY_TOKEN is empty"));
            }
            cfg.gateway_token = v;
        }
        if let Some(v) = get("GAIA_TZ") {
            cfg.timezone = v
                .parse()
                .map_err(|e| ConfigError::new(format!("GAIA_TZ {v:?}: {e}")))?;
        }
        for (key, dial) in [
            ("GAIA_DIAL_POWER", &mut cfg.dials.power),
            ("GAIA_DIAL_TEMPERATURE", &mut cfg.dials.temperature),
            ("GAIA_DIAL_HUMIDITY", &mut cfg.dials.humidity),
        ] {
            if let Some(v) = get(key) {
                *dial =
                    parse_dial(&v).map_err(|e| ConfigError::new(format!("{key} {v:?}: {e}")))?;
            }
        }
        cfg.static_dir = get("GAIA_STATIC_DIR").map(PathBuf::from);
        Ok(cfg)
    }
}

/// `lo:hi:leds`, e.g. `0:3000:12`.
pub fn parse_dial(s: &str) -> Result<Dial, ConfigError> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(ConfigError::new("expected lo:hi:leds"));
    };
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|e| ConfigError::new(format!("{x:?}: {e}")))
    };
    let n = n
        .trim()
        .parse::<u32>()
        .map_err(|e| ConfigError::new(format!("{n:?}: {e}")))?;
    Dial::new(num(lo)?, num(hi)?, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn env_overrides() {
        let env: HashMap<&str, &str> = [
            ("GAIA_LISTEN", "0.0.0.0:9000"),
            ("GAIA_TZ", "Europe/Athens"),
            ("GAIA_DIAL_POWER", "0:5000:16"),
        ]
        .into();
        let cfg = ApiConfig::from_lookup(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(cfg.listen.port(), 9000);
        assert_eq!(cfg.timezone, chrono_tz::Europe::Athens);
        assert_eq!(
            cfg.dials.power,
            Dial {
                lo: 0.0,
                hi: 5000.0,
                n_leds: 16
            }
        );
        assert_eq!(cfg.dials.humidity, Dials::default().humidity);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(parse_dial("3000:0:12").is_err());
        assert!(parse_dial("0:1").is_err());
        assert!(
            ApiConfig::from_lookup(|k| (k == "GAIA_TZ").then(|| "Mars/Base".to_string())).is_err()
        );
    }
}
