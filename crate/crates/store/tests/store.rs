use std::fs;
use std::sync::Arc;

use chrono::NaiveDate;
use gaia_core::topology::*;
use gaia_core::{Metric, Reading};
use gaia_store::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

// 2020-09-14 00:00:00 UTC
const DAY0: i64 = 1_600_041_600;

fn deployment(meter_interval: u32) -> Arc<Deployment> {
    let room = |id: &str| Room {
        id: id.into(),
        floor_id: "f0".into(),
        name: id.to_uppercase(),
        orientation: Orientation::S,
        area_m2: 40.0,
    };
    let classroom = |id: u16, room: &str| NodeDescriptor {
        node_id: id,
        kind: NodeKind::Classroom,
        binding: Binding::Room(room.into()),
        metrics: Metric::CLASSROOM.to_vec(),
        report_interval_s: 60,
    };
    let d = Deployment {
        topology: BuildingTopology {
            buildings: vec![Building {
                id: "b1".into(),
                name: "School".into(),
            }],
            floors: vec![Floor {
                id: "f0".into(),
                building_id: "b1".into(),
                level: 0,
            }],
            rooms: vec![room("r1"), room("r2"), room("r3")],
        },
        nodes: vec![
            classroom(1, "r1"),
            classroom(2, "r2"),
            classroom(3, "r2"),
            NodeDescriptor {
                node_id: 100,
                kind: NodeKind::PowerMeter,
                binding: Binding::Building("b1".into()),
                metrics: Metric::PHASES.to_vec(),
                report_interval_s: meter_interval,
            },
        ],
    };
    d.validate().unwrap();
    Arc::new(d)
}

fn open(dir: &std::path::Path) -> Store {
    Store::open(dir, deployment(60), StoreConfig::default()).unwrap()
}

fn reading(node_id: u16, metric: &str, value: f64, ts: i64, seq: i64) -> IngestReading {
    IngestReading {
        node_id: node_id as i64,
        metric: metric.into(),
        value,
        ts,
        seq,
    }
}

fn batch(id: &str, readings: Vec<IngestReading>) -> IngestBatch {
    IngestBatch {
        gateway_id: "gw".into(),
        batch_id: id.into(),
        readings,
    }
}

#[test]
fn ingest_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let b = batch(
        "gw-1",
        vec![
            reading(1, "temperature", 21.5, DAY0, 1),
            reading(1, "humidity", 40.0, DAY0, 1),
            reading(2, "temperature", 22.0, DAY0, 1),
        ],
    );
    let r = store.ingest(&b).unwrap();
    assert_eq!((r.accepted, r.duplicates, r.rejected.len()), (3, 0, 0));
    let r = store.ingest(&b).unwrap();
    assert_eq!((r.accepted, r.duplicates, r.rejected.len()), (0, 3, 0));
    assert_eq!(store.len(), 3);
}

#[test]
fn per_reading_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let b = batch(
        "gw-1",
        vec![
            reading(1, "humidity", 150.0, DAY0, 1),
            reading(1, "temperature", 20.0, DAY0, 1),
            reading(1, "co2", 400.0, DAY0, 1),
            IngestReading {
                node_id: 70_000,
                metric: "noise".into(),
                value: 1.0,
                ts: DAY0,
                seq: 1,
            },
            reading(1, "noise", 1.0, -5, 1),
            reading(1, "motion", 1.0, DAY0, -1),
            // same key twice inside one batch
            reading(1, "temperature", 20.0, DAY0, 1),
        ],
    );
    let r = store.ingest(&b).unwrap();
    assert_eq!(r.accepted, 1);
    assert_eq!(r.duplicates, 1);
    assert_eq!(r.total(), 7);
    let reasons: Vec<_> = r.rejected.iter().map(|x| (x.index, x.reason)).collect();
    assert_eq!(
        reasons,
        [
            (0, RejectReason::OutOfRange),
            (2, RejectReason::UnknownMetric),
            (3, RejectReason::InvalidNodeId),
            (4, RejectReason::InvalidTs),
            (5, RejectReason::InvalidSeq),
        ]
    );
}

#[test]
fn latest_examples() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let room = Target::Room("r2".into());
    assert_eq!(store.latest(&room, Metric::Temperature).unwrap(), None);
    store
        .ingest(&batch("a", vec![reading(2, "temperature", 20.0, 100, 1)]))
        .unwrap();
    store
        .ingest(&batch("b", vec![reading(2, "temperature", 21.0, 200, 2)]))
        .unwrap();
    let l = store.latest(&room, Metric::Temperature).unwrap().unwrap();
    assert_eq!((l.ts, l.value), (200, 21.0));
    store
        .ingest(&batch("c", vec![reading(3, "temperature", 23.0, 300, 1)]))
        .unwrap();
    let l = store.latest(&room, Metric::Temperature).unwrap().unwrap();
    assert_eq!((l.node_id, l.ts), (3, 300));
    // same ts: larger seq wins
    store
        .ingest(&batch("d", vec![reading(2, "temperature", 24.0, 300, 9)]))
        .unwrap();
    assert_eq!(
        store
            .latest(&room, Metric::Temperature)
            .unwrap()
            .unwrap()
            .node_id,
        2
    );
    assert!(matches!(
        store.latest(&Target::Room("zz".into()), Metric::Temperature),
        Err(StoreError::NotFound(_))
    ));
    assert!(matches!(
        store.latest(&Target::Node(9), Metric::Temperature),
        Err(StoreError::NotFound(_))
    ));
}

#[test]
fn series_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let rs = (0..10)
        .map(|i| reading(1, "noise", i as f64, DAY0 + i * 60, i + 1))
        .collect();
    store.ingest(&batch("a", rs)).unwrap();
    let t = Target::Room("r1".into());
    assert_eq!(
        store.series(&t, Metric::Noise, 0, i64::MAX).unwrap().len(),
        10
    );
    assert!(store
        .series(&t, Metric::Noise, DAY0 + 60, DAY0 + 60)
        .unwrap()
        .is_empty());
    assert_eq!(
        store
            .series(&t, Metric::Noise, DAY0 + 60, DAY0 + 180)
            .unwrap()
            .len(),
        2
    );
    assert!(matches!(
        store.series(&t, Metric::Noise, 10, 5),
        Err(StoreError::InvalidRange(_))
    ));
    assert!(matches!(
        store.aggregate(&t, Metric::Noise, 0, 10, 0, AggFn::Avg),
        Err(StoreError::InvalidRange(_))
    ));
}

fn random_store(seed: u64, n: usize) -> (tempfile::TempDir, Store, Vec<Reading>) {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut all = Vec::new();
    let mut raws = Vec::new();
    for i in 0..n {
        let node = [1u16, 2, 3][rng.random_range(0..3)];
        let r = Reading {
            node_id: node,
            metric: Metric::Temperature,
            value: (rng.random_range(-4000..8500) as f64) / 100.0,
            ts: (DAY0 + rng.random_range(0..86_400)) as u32,
            seq: i as u32,
        };
        raws.push(IngestReading::from(&r));
        all.push(r);
    }
    for (i, chunk) in raws.chunks(97).enumerate() {
        store
            .ingest(&batch(&format!("b{i}"), chunk.to_vec()))
            .unwrap();
    }
    (dir, store, all)
}

#[test]
fn series_matches_linear_scan() {
    let (_dir, store, all) = random_store(11, 1000);
    for (room, nodes) in [("r1", vec![1u16]), ("r2", vec![2, 3])] {
        for (from, to) in [
            (0, i64::MAX),
            (DAY0 + 3600, DAY0 + 7200),
            (DAY0 + 500, DAY0 + 90_000),
        ] {
            let got = store
                .series(&Target::Room(room.into()), Metric::Temperature, from, to)
                .unwrap();
            let mut want: Vec<Reading> = all
                .iter()
                .filter(|r| {
                    nodes.contains(&r.node_id) && (r.ts as i64) >= from && (r.ts as i64) < to
                })
                .copied()
                .collect();
            want.sort_by_key(|r| (r.ts, r.seq, r.node_id));
            assert_eq!(got, want);
        }
    }
}

fn brute_force(all: &[Reading], nodes: &[u16], window: i64, func: AggFn) -> Vec<(i64, f64, usize)> {
    let mut groups: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
    for r in all.iter().filter(|r| nodes.contains(&r.node_id)) {
        let ts = r.ts as i64;
        groups
            .entry(ts.div_euclid(window) * window)
            .or_default()
            .push(r.value);
    }
    groups
        .into_iter()
        .map(|(start, vs)| {
            let v = match func {
                AggFn::Avg => vs.iter().sum::<f64>() / vs.len() as f64,
                AggFn::Sum => vs.iter().sum(),
                AggFn::Min => vs.iter().cloned().fold(f64::INFINITY, f64::min),
                AggFn::Max => vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            };
            (start, v, vs.len())
        })
        .collect()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn aggregate_matches_brute_force(seed in any::<u64>(), window in prop_oneof![Just(60u32), Just(900), Just(3600), 1u32..5000]) {
        let (_dir, store, all) = random_store(seed, 1000);
        for func in [AggFn::Avg, AggFn::Min, AggFn::Max, AggFn::Sum] {
            let got = store
                .aggregate(&Target::Room("r2".into()), Metric::Temperature, 0, i64::MAX, window, func)
                .unwrap();
            let want = brute_force(&all, &[2, 3], window as i64, func);
            prop_assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                prop_assert_eq!(g.window_start, w.0);
                prop_assert_eq!(g.sample_count, w.2);
                prop_assert!(rel_close(g.value, w.1, 1e-9), "{} vs {}", g.value, w.1);
            }
        }
    }
}

fn power_batch(id: &str, samples: &[(i64, f64)], metric: &str) -> IngestBatch {
    let rs = samples
        .iter()
        .enumerate()
        .map(|(i, (ts, w))| reading(100, metric, *w, *ts, i as i64 + 1))
        .collect();
    batch(id, rs)
}

#[test]
fn constant_day_is_24_kwh() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let samples: Vec<(i64, f64)> = (0..=1440).map(|i| (DAY0 + i * 60, 1000.0)).collect();
    store
        .ingest(&power_batch("p", &samples, "power_phase_a"))
        .unwrap();
    let day = NaiveDate::from_ymd_opt(2020, 9, 14).unwrap();
    let e = store.daily_energy("b1", day).unwrap().unwrap();
    assert!(
        (e.phase_a_kwh - 24.0).abs() <= 24.0 * 1e-9,
        "{}",
        e.phase_a_kwh
    );
    assert_eq!(e.phase_b_kwh, 0.0);
    assert_eq!(e.total_kwh, e.phase_a_kwh);
    let next = NaiveDate::from_ymd_opt(2020, 9, 16).unwrap();
    assert_eq!(store.daily_energy("b1", next).unwrap(), None);
    assert!(matches!(
        store.daily_energy("b9", day),
        Err(StoreError::NotFound(_))
    ));
}

#[test]
fn two_samples_one_hour_trapezoid() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path(), deployment(3600), StoreConfig::default()).unwrap();
    store
        .ingest(&power_batch(
            "p",
            &[(DAY0, 1000.0), (DAY0 + 3600, 2000.0)],
            "power_phase_b",
        ))
        .unwrap();
    let e = store
        .daily_energy("b1", NaiveDate::from_ymd_opt(2020, 9, 14).unwrap())
        .unwrap()
        .unwrap();
    assert!((e.phase_b_kwh - 1.5).abs() < 1e-12);
    assert!((e.total_kwh - 1.5).abs() < 1e-12);
}

/// Piecewise-linear power profile over one day, evaluated independently of the store.
fn profile(t: f64) -> f64 {
    const KNOTS: [(f64, f64); 7] = [
        (0.0, 900.0),
        (7.25 * 3600.0, 950.0),
        (8.0 * 3600.0, 4200.0),
        (12.5 * 3600.0, 3800.0),
        (16.1 * 3600.0, 1200.0),
        (19.0 * 3600.0, 1000.0),
        (86_400.0, 900.0),
    ];
    for w in KNOTS.windows(2) {
        let ((t0, p0), (t1, p1)) = (w[0], w[1]);
        if t >= t0 && t <= t1 {
            return p0 + (p1 - p0) * (t - t0) / (t1 - t0);
        }
    }
    unreachable!()
}

#[test]
fn piecewise_profile_matches_riemann_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let samples: Vec<(i64, f64)> = (0..=1440)
        .map(|i| (DAY0 + i * 60, profile((i * 60) as f64)))
        .collect();
    store
        .ingest(&power_batch("p", &samples, "power_phase_c"))
        .unwrap();
    let got = store
        .daily_energy("b1", NaiveDate::from_ymd_opt(2020, 9, 14).unwrap())
        .unwrap()
        .unwrap();
    let oracle_j: f64 = (0..86_400).map(|s| profile(s as f64 + 0.5)).sum();
    let oracle = oracle_j / 3.6e6;
    assert!(
        (got.phase_c_kwh - oracle).abs() / oracle < 1e-3,
        "{} vs {}",
        got.phase_c_kwh,
        oracle
    );
}

#[test]
fn outage_gap_contributes_zero() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    // full day except a 2-hour hole from 10:00 to 12:00
    let samples: Vec<(i64, f64)> = (0..=1440)
        .filter(|i| !(601..720).contains(i))
        .map(|i| (DAY0 + i * 60, 1000.0))
        .collect();
    store
        .ingest(&power_batch("p", &samples, "power_phase_a"))
        .unwrap();
    let e = store
        .daily_energy("b1", NaiveDate::from_ymd_opt(2020, 9, 14).unwrap())
        .unwrap()
        .unwrap();
    assert!((e.phase_a_kwh - 22.0).abs() < 1e-9, "{}", e.phase_a_kwh);
}

#[test]
fn day_bounds_follow_timezone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = StoreConfig {
        timezone: "Europe/Athens".parse().unwrap(),
        ..Default::default()
    };
    let store = Store::open(dir.path(), deployment(60), cfg).unwrap();
    let (s, e) = store.day_bounds(NaiveDate::from_ymd_opt(2020, 9, 14).unwrap());
    assert_eq!((s, e), (DAY0 - 3 * 3600, DAY0 + 21 * 3600));
    // DST ends 2020-10-25 in Athens: a 25-hour day
    let (s, e) = store.day_bounds(NaiveDate::from_ymd_opt(2020, 10, 25).unwrap());
    assert_eq!(e - s, 25 * 3600);
}

#[test]
fn reopen_answers_identically() {
    let (dir, store, _) = random_store(5, 600);
    let t = Target::Room("r2".into());
    let before = store.series(&t, Metric::Temperature, 0, i64::MAX).unwrap();
    let latest = store.latest(&t, Metric::Temperature).unwrap();
    drop(store);
    let store = open(dir.path());
    assert_eq!(
        store.series(&t, Metric::Temperature, 0, i64::MAX).unwrap(),
        before
    );
    assert_eq!(store.latest(&t, Metric::Temperature).unwrap(), latest);
    assert_eq!(store.len(), 600);
}

#[test]
fn torn_tail_dropped_and_appends_continue() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let rs = (0..5)
        .map(|i| reading(1, "noise", 1.0, DAY0 + i, i))
        .collect();
    store.ingest(&batch("a", rs)).unwrap();
    drop(store);
    let seg = dir.path().join("segments/000000.log");
    let data = fs::read(&seg).unwrap();
    // cut the final record in half
    fs::write(&seg, &data[..data.len() - 20]).unwrap();
    let store = open(dir.path());
    assert_eq!(store.len(), 4);
    let last_line = data[..data.len() - 1]
        .iter()
        .rposition(|b| *b == b'\n')
        .unwrap()
        + 1;
    assert_eq!(
        store.torn_tail_bytes(),
        (data.len() - 20 - last_line) as u64
    );
    let r = store
        .ingest(&batch("b", vec![reading(1, "noise", 2.0, DAY0 + 9, 9)]))
        .unwrap();
    assert_eq!(r.accepted, 1);
    drop(store);
    let store = open(dir.path());
    assert_eq!(store.torn_tail_bytes(), 0);
    assert_eq!(store.len(), 5);
    assert_eq!(scan_segments(dir.path()).unwrap().len(), 5);
}

#[test]
fn middle_corruption_is_recovery_error() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let rs = (0..5)
        .map(|i| reading(1, "noise", 1.0, DAY0 + i, i))
        .collect();
    store.ingest(&batch("a", rs)).unwrap();
    drop(store);
    let seg = dir.path().join("segments/000000.log");
    let mut data = fs::read(&seg).unwrap();
    let second_line = data.iter().position(|b| *b == b'\n').unwrap() + 1;
    data[second_line + 3] = b'#';
    fs::write(&seg, &data).unwrap();
    match Store::open(dir.path(), deployment(60), StoreConfig::default()) {
        Err(StoreError::Recovery {
            segment, offset, ..
        }) => {
            assert!(segment.ends_with("000000.log"));
            assert_eq!(offset, second_line as u64);
        }
        other => panic!("expected recovery error, got {other:?}"),
    }
}

#[test]
fn segments_roll_and_recover_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = StoreConfig {
        segment_max_bytes: 2048,
        ..Default::default()
    };
    let store = Store::open(dir.path(), deployment(60), cfg.clone()).unwrap();
    for b in 0..20 {
        let rs = (0..10)
            .map(|i| reading(1, "motion", 3.0, DAY0 + b * 10 + i, b * 10 + i))
            .collect();
        store.ingest(&batch(&format!("b{b}"), rs)).unwrap();
    }
    drop(store);
    let n_segments = fs::read_dir(dir.path().join("segments")).unwrap().count();
    assert!(n_segments > 3, "{n_segments}");
    let store = Store::open(dir.path(), deployment(60), cfg).unwrap();
    let s = store
        .series(&Target::Node(1), Metric::Motion, 0, i64::MAX)
        .unwrap();
    assert_eq!(s.len(), 200);
    assert!(s.windows(2).all(|w| w[0].ts < w[1].ts));
}

#[test]
fn concurrent_ingest_and_queries() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(open(dir.path()));
    let mut handles = Vec::new();
    for t in 0..4i64 {
        let store = store.clone();
        handles.push(std::thread::spawn(move || {
            for b in 0..25i64 {
                let rs = (0..20)
                    .map(|i| {
                        reading(
                            1 + (t % 3) as u16,
                            "humidity",
                            50.0,
                            DAY0 + b * 20 + i,
                            t * 10_000 + b * 20 + i,
                        )
                    })
                    .collect();
                store.ingest(&batch("x", rs)).unwrap();
            }
        }));
    }
    let reader = {
        let store = store.clone();
        std::thread::spawn(move || {
            for _ in 0..200 {
                let s = store
                    .series(
                        &Target::Building("b1".into()),
                        Metric::Humidity,
                        0,
                        i64::MAX,
                    )
                    .unwrap();
                assert!(s.windows(2).all(
                    |w| (w[0].ts, w[0].seq, w[0].node_id) <= (w[1].ts, w[1].seq, w[1].node_id)
                ));
            }
        })
    };
    for h in handles {
        h.join().unwrap();
    }
    reader.join().unwrap();
    assert_eq!(store.len(), 4 * 25 * 20);
}

#[test]
fn read_only_handle_leaves_files_alone() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let rs = (0..5)
        .map(|i| reading(1, "noise", 1.0, DAY0 + i, i))
        .collect();
    store.ingest(&batch("a", rs)).unwrap();
    let seg = dir.path().join("segments/000000.log");
    // a writer in the middle of an append
    let mut f = fs::OpenOptions::new().append(true).open(&seg).unwrap();
    std::io::Write::write_all(&mut f, b"{\"node_id\":1,").unwrap();
    let size = fs::metadata(&seg).unwrap().len();

    let ro = Store::open_read_only(dir.path(), deployment(60), StoreConfig::default()).unwrap();
    assert_eq!(ro.len(), 5);
    assert_eq!(fs::metadata(&seg).unwrap().len(), size);
    assert!(matches!(
        ro.ingest(&batch("b", vec![])),
        Err(StoreError::ReadOnly)
    ));

    let missing = Store::open_read_only(
        &dir.path().join("nope"),
        deployment(60),
        StoreConfig::default(),
    )
    .unwrap();
    assert!(missing.is_empty());
    assert!(!dir.path().join("nope").exists());
}
