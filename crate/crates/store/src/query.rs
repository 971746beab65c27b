//! Pure computations over ordered reading series.

use std::fmt;
use std::str::FromStr;

use gaia_core::Reading;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFn {
    Avg,
    Min,
    Max,
    Sum,
}

impl FromStr for AggFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "avg" => Ok(AggFn::Avg),
            "min" => Ok(AggFn::Min),
            "max" => Ok(AggFn::Max),
            "sum" => Ok(AggFn::Sum),
            other => Err(format!("unknown aggregate function {other:?}")),
        }
    }
}

impl fmt::Display for AggFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggFn::Avg => "avg",
            AggFn::Min => "min",
            AggFn::Max => "max",
            AggFn::Sum => "sum",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggPoint {
    pub window_start: i64,
    pub value: f64,
    pub sample_count: usize,
}

pub fn window_start(ts: i64, window_s: u32) -> i64 {
    ts - ts.rem_euclid(window_s as i64)
}

/// Tumbling epoch-aligned aggregation over a series already sorted by ts.
/// Empty windows are omitted.
pub fn aggregate_sorted(series: &[Reading], window_s: u32, func: AggFn) -> Vec<AggPoint> {
    assert!(window_s >= 1);
    let mut out: Vec<AggPoint> = Vec::new();
    let mut acc: Option<(i64, f64, usize)> = None;
    let finish = |acc: Option<(i64, f64, usize)>, out: &mut Vec<AggPoint>| {
        if let Some((start, v, n)) = acc {
            let value = if func == AggFn::Avg { v / n as f64 } else { v };
            out.push(AggPoint {
                window_start: start,
                value,
                sample_count: n,
            });
        }
    };
    for r in series {
        let start = window_start(r.ts as i64, window_s);
        acc = match acc {
            Some((s, v, n)) if s == start => {
                let v = match func {
                    AggFn::Avg | AggFn::Sum => v + r.value,
                    AggFn::Min => v.min(r.value),
                    AggFn::Max => v.max(r.value),
                };
                Some((s, v, n + 1))
            }
            prev => {
                finish(prev, &mut out);
                Some((start, r.value, 1))
            }
        };
    }
    finish(acc, &mut out);
    out
}

/// Energy in joules of one power feed over `[start, end)`, by trapezoids
/// between consecutive samples. Segments longer than `max_gap_s` are outages
/// and contribute nothing. Segments straddling the bounds are clipped with
/// linear interpolation.
pub fn integrate_power(samples: &[(i64, f64)], start: i64, end: i64, max_gap_s: i64) -> f64 {
    let mut joules = 0.0;
    for w in samples.windows(2) {
        let ((t0, p0), (t1, p1)) = (w[0], w[1]);
        if t1 <= t0 || t1 - t0 > max_gap_s {
            continue;
        }
        let a = t0.max(start);
        let b = t1.min(end);
        if a >= b {
            continue;
        }
        let slope = (p1 - p0) / (t1 - t0) as f64;
        let pa = p0 + slope * (a - t0) as f64;
        let pb = p0 + slope * (b - t0) as f64;
        joules += 0.5 * (pa + pb) * (b - a) as f64;
    }
    joules
}

pub const JOULES_PER_KWH: f64 = 3.6e6;

#[cfg(test)]
mod tests {
    use super::*;
    use gaia_core::Metric;

    fn r(ts: u32, value: f64) -> Reading {
        Reading {
            node_id: 1,
            metric: Metric::Temperature,
            value,
            ts,
            seq: ts,
        }
    }

    #[test]
    fn avg_in_one_window() {
        let s = [r(0, 20.0), r(10, 22.0), r(20, 24.0)];
        let p = aggregate_sorted(&s, 60, AggFn::Avg);
        assert_eq!(
            p,
            vec![AggPoint {
                window_start: 0,
                value: 22.0,
                sample_count: 3
            }]
        );
    }

    #[test]
    fn max_each_in_own_window() {
        let s = [r(0, 20.0), r(60, 22.0), r(120, 24.0)];
        let v: Vec<f64> = aggregate_sorted(&s, 60, AggFn::Max)
            .iter()
            .map(|p| p.value)
            .collect();
        assert_eq!(v, [20.0, 22.0, 24.0]);
    }

    #[test]
    fn empty_windows_omitted_and_aligned() {
        let s = [r(59, 1.0), r(61, 2.0), r(400, 3.0)];
        let p = aggregate_sorted(&s, 60, AggFn::Sum);
        let starts: Vec<i64> = p.iter().map(|p| p.window_start).collect();
        assert_eq!(starts, [0, 60, 360]);
        assert!(aggregate_sorted(&[], 60, AggFn::Min).is_empty());
    }

    #[test]
    fn window_start_is_epoch_aligned() {
        assert_eq!(window_start(1_600_000_123, 60), 1_600_000_080);
        assert_eq!(window_start(-1, 60), -60);
    }

    #[test]
    fn trapezoid_one_hour() {
        let j = integrate_power(&[(0, 1000.0), (3600, 2000.0)], 0, 3600, 7200);
        assert!((j / JOULES_PER_KWH - 1.5).abs() < 1e-12);
    }

    #[test]
    fn gaps_contribute_nothing() {
        let s = [(0, 1000.0), (60, 1000.0), (600, 1000.0), (660, 1000.0)];
        let j = integrate_power(&s, 0, 1000, 120);
        assert!((j - 1000.0 * 120.0).abs() < 1e-9);
    }

    #[test]
    fn clipping_interpolates() {
        // ramp 0 -> 100 W over 100 s, keep [50, 100): average 75 W over 50 s
        let j = integrate_power(&[(0, 0.0), (100, 100.0)], 50, 100, 1000);
        assert!((j - 3750.0).abs() < 1e-9);
    }
}
