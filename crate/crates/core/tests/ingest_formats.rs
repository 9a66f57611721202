mod common;

use std::path::Path;

use common::malformed;
use fteval::ingest::{
    encode_ftev, parse_features_csv, parse_ftev, parse_landmarks_jsonl, read_scheme, read_stats,
    write_features_csv, write_landmarks_jsonl,
};
use fteval::model::{FeatureSet, LandmarkSequence, Point};
use fteval::{Error, ErrorClass};
use proptest::prelude::*;

/// Coordinates with at most six decimals, so the canonical writer is lossless.
fn micro() -> impl Strategy<Value = f64> {
    (-5_000_000_000i64..5_000_000_000).prop_map(|v| v as f64 / 1e6)
}

fn sequence() -> impl Strategy<Value = LandmarkSequence> {
    (1usize..6, 1usize..5).prop_flat_map(|(t, n)| {
        prop::collection::vec(prop::collection::vec((micro(), micro()), n), t).prop_map(|frames| {
            let points = frames
                .into_iter()
                .map(|f| f.into_iter().map(|(x, y)| Point::new(x, y)).collect())
                .collect();
            LandmarkSequence::from_points(points, 640, 480).unwrap()
        })
    })
}

fn feature_set() -> impl Strategy<Value = FeatureSet> {
    (2usize..8, 1usize..6).prop_flat_map(|(rows, dim)| {
        prop::collection::vec(-1e6f32..1e6, rows * dim).prop_map(move |v| {
            FeatureSet::new(rows, dim, v.into_iter().map(f64::from).collect()).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn canonical_jsonl_round_trips(seq in sequence(), schema in prop::option::of("[a-z0-9]{1,8}")) {
        let text = write_landmarks_jsonl(&seq, schema.as_deref());
        let (header, back) = parse_landmarks_jsonl(&text, Path::new("x.jsonl")).unwrap();
        prop_assert_eq!(header.schema.as_deref(), schema.as_deref());
        prop_assert_eq!(write_landmarks_jsonl(&back, header.schema.as_deref()), text);
        for (a, b) in back.frames().iter().zip(seq.frames()) {
            for (p, q) in a.points.iter().zip(&b.points) {
                prop_assert!((p.x - q.x).abs() <= 5e-7 && (p.y - q.y).abs() <= 5e-7);
            }
        }
    }

    #[test]
    fn ftev_round_trips(f in feature_set()) {
        let bytes = encode_ftev(&f).unwrap();
        let back = parse_ftev(&bytes, Path::new("x.ftev")).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(encode_ftev(&back).unwrap(), bytes);
    }

    #[test]
    fn ftev_and_csv_agree(f in feature_set()) {
        let from_bin = parse_ftev(&encode_ftev(&f).unwrap(), Path::new("x.ftev")).unwrap();
        let from_csv = parse_features_csv(&write_features_csv(&f), Path::new("x.csv")).unwrap();
        prop_assert_eq!(from_bin, from_csv);
    }
}

#[test]
fn malformed_files_report_class_and_location() {
    let dir = tempfile::tempdir().unwrap();
    let cases = malformed::cases();
    assert!(cases.len() >= 10);
    for case in cases {
        let path = dir.path().join(case.file);
        std::fs::write(&path, &case.contents).unwrap();
        let err = malformed::load(&path).expect_err(case.file);
        assert_eq!(err.class(), ErrorClass::Input, "{}", case.file);
        let Error::Parse(p) = &err else {
            panic!("{}: expected a parse error, got {err:?}", case.file);
        };
        assert!((case.expect)(&p.kind), "{}: unexpected {:?}", case.file, p.kind);
        assert_eq!(p.location, case.location, "{}", case.file);
        assert_eq!(p.path, path);
        let msg = err.to_string();
        assert!(msg.contains(case.file) && msg.contains(&case.location.to_string()), "{msg}");
    }
}

#[test]
fn scheme_and_stats_documents() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = dir.path().join("s.json");
    std::fs::write(&scheme, r#"{"name": "five", "total": 5, "mouth_indices": [4, 3]}"#).unwrap();
    let s = read_scheme(&scheme).unwrap();
    assert_eq!((s.name(), s.total(), s.mouth_indices()), ("five", 5, &[3usize, 4][..]));
    std::fs::write(&scheme, r#"{"name": "bad", "total": 5, "mouth_indices": [9]}"#).unwrap();
    assert_eq!(read_scheme(&scheme).unwrap_err().class(), ErrorClass::Input);

    let stats = dir.path().join("stats.json");
    std::fs::write(&stats, r#"{"mean": [0, 1], "cov": [[1, 0], [0, 2]]}"#).unwrap();
    let g = read_stats(&stats).unwrap();
    assert_eq!(g.dim(), 2);
    std::fs::write(&stats, r#"{"mean": [0, 1], "cov": [[1, 0.5], [0, 2]]}"#).unwrap();
    assert!(read_stats(&stats).is_err());
    std::fs::write(&stats, "{\"mean\": [0,\n 1], \"cov\": oops}").unwrap();
    let err = read_stats(&stats).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn missing_file_is_input_error() {
    let err = malformed::load(Path::new("/definitely/not/here.jsonl")).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Input);
    assert!(err.to_string().contains("/definitely/not/here.jsonl"));
}
