use gaia_core::frame::{decode_frame, encode_frame, NodeReport, Record, MAX_RECORDS};
use gaia_core::{FrameError, Metric, NodeKind};
use proptest::prelude::*;
use proptest::sample::subsequence;

fn wire_value(metric: Metric) -> impl Strategy<Value = i32> {
    let (lo, hi) = metric.range();
    let s = metric.wire_scale() as f64;
    ((lo * s) as i32)..=((hi * s) as i32)
}

prop_compose! {
    fn records()(metrics in subsequence(Metric::ALL.to_vec(), 1..=Metric::ALL.len()).prop_shuffle())
        (values in metrics.iter().map(|m| wire_value(*m)).collect::<Vec<_>>(), metrics in Just(metrics))
        -> Vec<Record> {
        metrics.into_iter().zip(values).map(|(m, w)| Record::new(m, w)).collect()
    }
}

prop_compose! {
    fn report()(kind in prop_oneof![Just(NodeKind::Classroom), Just(NodeKind::PowerMeter)],
                node_id in any::<u16>(), seq in any::<u32>(), ts in any::<u32>(), records in records())
        -> NodeReport {
        NodeReport { version: 1, node_kind: kind, node_id, seq, ts, records }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn decode_inverts_encode(r in report()) {
        let bytes = encode_frame(&r).unwrap();
        prop_assert!(r.records.len() <= MAX_RECORDS);
        prop_assert_eq!(bytes.len(), 14 + 3 * r.records.len());
        prop_assert_eq!(decode_frame(&bytes).unwrap(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn single_byte_corruption_detected(r in report(), pos in any::<prop::sample::Index>(), mask in 1u8..=255) {
        let mut bytes = encode_frame(&r).unwrap();
        let i = pos.index(bytes.len());
        bytes[i] ^= mask;
        prop_assert_eq!(decode_frame(&bytes), Err(FrameError::Checksum));
    }
}
