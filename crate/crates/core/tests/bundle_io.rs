use std::collections::BTreeMap;
use std::fs;

use myopattern::bundle::{
    read_bundle, segment_bundle, write_bundle, EmgBundle, Manifest, Signal, SubjectMeta, TrialRecord,
};
use myopattern::Error;
use proptest::prelude::*;

fn catalog() -> BTreeMap<u16, String> {
    [(1, "wrist flexion"), (2, "wrist extension"), (3, "power grip")]
        .into_iter()
        .map(|(k, v)| (k, v.to_string()))
        .collect()
}

fn bundle_from(trials: Vec<(usize, Vec<f32>, Vec<i16>)>) -> EmgBundle {
    EmgBundle {
        manifest: Manifest {
            subjects: vec![SubjectMeta::intact("S1"), SubjectMeta::amputee("A1")],
            gestures: catalog(),
            provenance: vec!["unit fixture".into()],
        },
        trials: trials
            .into_iter()
            .enumerate()
            .map(|(i, (ch, data, labels))| TrialRecord {
                subject_id: if i % 2 == 0 { "S1" } else { "A1" }.into(),
                signal: Signal::new(ch, data).unwrap(),
                labels,
                sample_rate: 2000.0,
            })
            .collect(),
    }
}

fn small() -> EmgBundle {
    let labels = vec![0, 1, 1, 1, 0, 2, 2, 0];
    let data: Vec<f32> = (0..16).map(|i| i as f32 * 0.25 - 2.0).collect();
    bundle_from(vec![(2, data, labels)])
}

fn trial_strategy() -> impl Strategy<Value = (usize, Vec<f32>, Vec<i16>)> {
    (1usize..5, 0usize..40).prop_flat_map(|(ch, n)| {
        (
            Just(ch),
            prop::collection::vec(-1e4f32..1e4, n * ch),
            prop::collection::vec(0i16..4, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn write_then_read_is_identity(trials in prop::collection::vec(trial_strategy(), 0..4)) {
        let bundle = bundle_from(trials);
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&bundle, dir.path()).unwrap();
        let back = read_bundle(dir.path()).unwrap();
        prop_assert_eq!(back, bundle);
    }
}

#[test]
fn special_float_bit_patterns_survive() {
    let data = vec![f32::MIN_POSITIVE, -0.0, f32::MAX, f32::MIN, 1e-45, 3.0];
    let bundle = bundle_from(vec![(3, data.clone(), vec![0, 0])]);
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&bundle, dir.path()).unwrap();
    let back = read_bundle(dir.path()).unwrap();
    let bits: Vec<u32> = back.trials[0].signal.as_slice().iter().map(|v| v.to_bits()).collect();
    let want: Vec<u32> = data.iter().map(|v| v.to_bits()).collect();
    assert_eq!(bits, want);
}

#[test]
fn signal_layout_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&small(), dir.path()).unwrap();
    let bytes = fs::read(dir.path().join("000.sig")).unwrap();
    assert_eq!(&bytes[..4], b"EMGB");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 8);
    assert_eq!(bytes.len(), 16 + 4 * 16);
    // sample 0 channel 1 is the second value
    assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()), -1.75);

    let lab = fs::read(dir.path().join("000.lab")).unwrap();
    assert_eq!(&lab[..4], b"EMGL");
    assert_eq!(u32::from_le_bytes(lab[4..8].try_into().unwrap()), 8);
    assert_eq!(i16::from_le_bytes([lab[10], lab[11]]), 1);
}

#[test]
fn truncated_signal_reports_sizes() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&small(), dir.path()).unwrap();
    let path = dir.path().join("000.sig");
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    match read_bundle(dir.path()) {
        Err(Error::Truncated { expected, actual, path: p }) => {
            assert_eq!(expected, 80);
            assert_eq!(actual, 77);
            assert!(p.ends_with("000.sig"));
        }
        other => panic!("expected truncation, got {other:?}"),
    }
}

#[test]
fn truncated_header_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&small(), dir.path()).unwrap();
    fs::write(dir.path().join("000.lab"), b"EML").unwrap();
    assert!(matches!(
        read_bundle(dir.path()),
        Err(Error::Truncated { expected: 8, actual: 3, .. })
    ));
}

#[test]
fn bad_magic_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&small(), dir.path()).unwrap();
    let path = dir.path().join("000.sig");
    let mut bytes = fs::read(&path).unwrap();
    bytes[0] = b'X';
    fs::write(&path, bytes).unwrap();
    let err = read_bundle(dir.path()).unwrap_err();
    assert!(matches!(err, Error::Format { .. }), "{err}");
    assert!(err.is_validation());
}

#[test]
fn label_count_must_match_samples() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&small(), dir.path()).unwrap();
    let mut lab = b"EMGL".to_vec();
    lab.extend(7u32.to_le_bytes());
    lab.extend(std::iter::repeat_n(0u8, 14));
    fs::write(dir.path().join("000.lab"), lab).unwrap();
    let err = read_bundle(dir.path()).unwrap_err();
    assert!(err.to_string().contains("7 labels"), "{err}");
}

#[test]
fn header_must_agree_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&small(), dir.path()).unwrap();
    let path = dir.path().join("manifest.json");
    let text = fs::read_to_string(&path).unwrap().replace("\"n_samples\": 8", "\"n_samples\": 9");
    fs::write(&path, text).unwrap();
    assert!(matches!(read_bundle(dir.path()), Err(Error::Format { .. })));
}

#[test]
fn missing_signal_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&small(), dir.path()).unwrap();
    fs::remove_file(dir.path().join("000.sig")).unwrap();
    assert!(matches!(read_bundle(dir.path()), Err(Error::Io { .. })));
}

#[test]
fn wrong_format_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&small(), dir.path()).unwrap();
    let path = dir.path().join("manifest.json");
    let text = fs::read_to_string(&path)
        .unwrap()
        .replace("\"format_version\": \"1\"", "\"format_version\": \"2\"");
    fs::write(&path, text).unwrap();
    assert!(matches!(read_bundle(dir.path()), Err(Error::Format { .. })));
}

#[test]
fn invariants_are_checked_on_write() {
    let mut b = small();
    b.trials[0].subject_id = "S9".into();
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(write_bundle(&b, dir.path()), Err(Error::Invariant(_))));

    let mut b = small();
    b.trials[0].labels[1] = 7;
    assert!(matches!(b.validate(), Err(Error::Invariant(_))));

    let mut b = small();
    b.trials[0].labels.pop();
    assert!(matches!(b.validate(), Err(Error::Invariant(_))));

    let mut b = small();
    b.trials[0].signal = Signal::zeros(8, 0);
    assert!(matches!(b.validate(), Err(Error::Invariant(_))));

    let mut b = small();
    b.manifest.subjects.push(SubjectMeta::intact("S1"));
    assert!(b.validate().is_err());
}

#[test]
fn repetitions_are_numbered_across_trials() {
    // the same subject and gesture in two trials continue the count
    let t0 = (1, vec![0.0; 6], vec![0, 1, 1, 0, 1, 0]);
    let t1 = (1, vec![0.0; 6], vec![1, 0, 0, 0, 0, 0]);
    let t2 = (1, vec![0.0; 4], vec![0, 1, 1, 0]);
    let b = bundle_from(vec![t0, t1.clone(), t2]);
    let segs = segment_bundle(&b);
    let s1: Vec<(usize, u32, usize, usize)> = segs
        .iter()
        .filter(|s| s.subject_id == "S1")
        .map(|s| (s.trial, s.repetition_index, s.sample_range.start, s.sample_range.end))
        .collect();
    assert_eq!(s1, vec![(0, 1, 1, 3), (0, 2, 4, 5), (2, 3, 1, 3)]);
    let a1: Vec<u32> = segs.iter().filter(|s| s.subject_id == "A1").map(|s| s.repetition_index).collect();
    assert_eq!(a1, vec![1]);
}
