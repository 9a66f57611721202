use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fteval::ingest::{encode_ftev, write_frames, write_landmarks_jsonl};
use fteval::report::{write_demo_manifest, MetricReport};
use fteval::sync::EmbeddingStream;
use fteval::synth::{
    perturb, synth_features, synth_frames, synth_landmarks, synth_stream, HeadDrift, Perturbation,
    SynthSpec,
};
use fteval::model::FeatureSet;
use serde_json::Value;

fn fteval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fteval"))
        .args(args)
        .env_remove("FTEVAL_SCHEME_DIR")
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stream_features(s: &EmbeddingStream) -> FeatureSet {
    FeatureSet::new(s.len(), s.dim(), s.iter().flatten().copied().collect()).unwrap()
}

/// Writes one copy of every input kind under `dir` and returns the paths.
struct Fixture {
    landmarks: PathBuf,
    moved_landmarks: PathBuf,
    frames: PathBuf,
    features: PathBuf,
    stream: PathBuf,
}

fn fixture(dir: &Path) -> Fixture {
    let spec = SynthSpec {
        head_drift: HeadDrift { amplitude: 2.0, period: 9.0 },
        mouth_open: vec![0.0, 0.5, 1.0],
        ..SynthSpec::still(5, 12, 68, 200, 200)
    };
    let seq = synth_landmarks(&spec).unwrap();
    let moved = perturb(&seq, Perturbation::Translate { dx: 3.0, dy: 0.0 }).unwrap();
    let f = Fixture {
        landmarks: dir.join("a.jsonl"),
        moved_landmarks: dir.join("b.jsonl"),
        frames: dir.join("frames"),
        features: dir.join("f.ftev"),
        stream: dir.join("s.ftev"),
    };
    std::fs::write(&f.landmarks, write_landmarks_jsonl(&seq, Some("ibug68"))).unwrap();
    std::fs::write(&f.moved_landmarks, write_landmarks_jsonl(&moved, None)).unwrap();
    write_frames(&f.frames, &synth_frames(1, 3, 24, 24, 3).unwrap()).unwrap();
    let feats = synth_features(2, 40, 4, &[0.0; 4], 1.0).unwrap();
    std::fs::write(&f.features, encode_ftev(&feats).unwrap()).unwrap();
    let s = stream_features(&synth_stream(3, 40, 8).unwrap());
    std::fs::write(&f.stream, encode_ftev(&s).unwrap()).unwrap();
    f
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path());
    assert_eq!(fteval(&["--help"]).status.code(), Some(0));
    assert_eq!(fteval(&["--version"]).status.code(), Some(0));
    assert_eq!(fteval(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(fteval(&["adfd", "--gen", "x"]).status.code(), Some(1));
    assert_eq!(
        fteval(&["adfd", "--gen", p(&f.landmarks), "--gt", p(&f.landmarks), "--scheme", "nope"])
            .status
            .code(),
        Some(1)
    );
    let missing = fteval(&["adfd", "--gen", "/no/such.jsonl", "--gt", p(&f.landmarks)]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"frame\": 0, \"points\": []}\n").unwrap();
    let out = fteval(&["lmd", "--gen", p(&bad), "--gt", p(&f.landmarks)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.jsonl") && err.contains("line 1"), "{err}");

    // 68-point track against the default scheme is fine; a 4-point one is not
    let four = dir.path().join("four.jsonl");
    let seq = synth_landmarks(&SynthSpec::still(1, 3, 4, 64, 64)).unwrap();
    std::fs::write(&four, write_landmarks_jsonl(&seq, None)).unwrap();
    assert_eq!(fteval(&["lmd", "--gen", p(&four), "--gt", p(&four)]).status.code(), Some(3));
    assert_eq!(
        fteval(&["adfd", "--gen", p(&four), "--gt", p(&f.landmarks)]).status.code(),
        Some(3)
    );
}

#[test]
fn single_metric_commands() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path());
    let a = stdout_json(&fteval(&["adfd", "--gen", p(&f.moved_landmarks), "--gt", p(&f.landmarks)]));
    assert_eq!(a["motion"].as_f64(), Some(1.0));
    assert!((a["spatial"].as_f64().unwrap() - (1.0 - 3.0 / 200f64.hypot(200.0))).abs() < 1e-9);

    let l = stdout_json(&fteval(&["lmd", "--gen", p(&f.moved_landmarks), "--gt", p(&f.landmarks)]));
    assert!((l["f_lmd"].as_f64().unwrap() - 3.0).abs() < 1e-9);

    let s = stdout_json(&fteval(&["ssim", "--gen", p(&f.frames), "--gt", p(&f.frames)]));
    assert_eq!(s["mean"].as_f64(), Some(1.0));
    let ps = stdout_json(&fteval(&["psnr", "--gen", p(&f.frames), "--gt", p(&f.frames)]));
    assert_eq!(ps["identical_frames"].as_u64(), Some(3));
    assert!(ps["mean_db"].is_null());

    let fid = stdout_json(&fteval(&["fid", "--gen", p(&f.features), "--gt", p(&f.features)]));
    assert!(fid["fid"].as_f64().unwrap() <= 1e-4);

    let sync = stdout_json(&fteval(&["sync", "--audio", p(&f.stream), "--visual", p(&f.stream), "--max-offset", "5"]));
    assert_eq!(sync["best_offset"].as_i64(), Some(0));
    assert_eq!(sync["distance_curve"].as_array().unwrap().len(), 11);

    let csv = fteval(&["lmd", "--gen", p(&f.landmarks), "--gt", p(&f.landmarks), "--format", "csv"]);
    assert_eq!(String::from_utf8_lossy(&csv.stdout), "metric,value\nf_lmd,0\nm_lmd,0\n");
}

#[test]
fn fid_from_statistics_documents() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    std::fs::write(&a, r#"{"mean": [0, 0], "cov": [[1, 0], [0, 1]]}"#).unwrap();
    std::fs::write(&b, r#"{"mean": [3, 4], "cov": [[1, 0], [0, 1]]}"#).unwrap();
    let v = stdout_json(&fteval(&["fid", "--gen-stats", p(&a), "--gt-stats", p(&b), "--fid-eps", "0"]));
    assert!((v["fid"].as_f64().unwrap() - 25.0).abs() < 1e-9);
    std::fs::write(&b, r#"{"mean": [0, 0], "cov": [[1, 0], [0, -1]]}"#).unwrap();
    let out = fteval(&["fid", "--gen-stats", p(&a), "--gt-stats", p(&b)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn scheme_directory_and_generic_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synth_landmarks(&SynthSpec::still(1, 3, 6, 64, 64)).unwrap();
    let moved = perturb(&seq, Perturbation::Translate { dx: 0.0, dy: 1.0 }).unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    std::fs::write(&a, write_landmarks_jsonl(&seq, None)).unwrap();
    std::fs::write(&b, write_landmarks_jsonl(&moved, None)).unwrap();
    std::fs::write(
        dir.path().join("six.json"),
        r#"{"name": "six", "total": 6, "mouth_indices": [4, 5]}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fteval"))
        .args(["lmd", "--gen", p(&a), "--gt", p(&b), "--scheme", "six"])
        .env("FTEVAL_SCHEME_DIR", dir.path())
        .output()
        .unwrap();
    let v = stdout_json(&out);
    assert!((v["m_lmd"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    assert_eq!(fteval(&["lmd", "--gen", p(&a), "--gt", p(&b), "--scheme", "generic"]).status.code(), Some(1));
    let v = stdout_json(&fteval(&[
        "lmd", "--gen", p(&a), "--gt", p(&b), "--scheme", "generic", "--mouth", "0,1",
    ]));
    assert!((v["m_lmd"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn eval_landmarks_only_marks_rest_absent() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path());
    let v = stdout_json(&fteval(&[
        "eval",
        "--gen-landmarks",
        p(&f.moved_landmarks),
        "--gt-landmarks",
        p(&f.landmarks),
    ]));
    let m = &v["entries"][0]["metrics"];
    assert!(m["adfd"].is_number() && m["f_lmd"].is_number() && m["m_lmd"].is_number());
    for absent in ["psnr", "ssim", "fid", "sync_conf", "sync_dist", "sync_offset"] {
        assert_eq!(m[absent], "absent", "{absent}");
        assert_eq!(v["aggregate"][absent]["mean"], "absent");
    }
}

#[test]
fn eval_identity_composite() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path());
    let v = stdout_json(&fteval(&[
        "eval",
        "--gen-landmarks", p(&f.landmarks), "--gt-landmarks", p(&f.landmarks),
        "--gen-frames", p(&f.frames), "--gt-frames", p(&f.frames),
        "--gen-features", p(&f.features), "--gt-features", p(&f.features),
        "--audio-embed", p(&f.stream), "--visual-embed", p(&f.stream),
        "--max-offset", "5",
    ]));
    let m = &v["entries"][0]["metrics"];
    assert_eq!(m["adfd"].as_f64(), Some(1.0));
    assert_eq!(m["f_lmd"].as_f64(), Some(0.0));
    assert_eq!(m["m_lmd"].as_f64(), Some(0.0));
    assert_eq!(m["ssim"].as_f64(), Some(1.0));
    assert_eq!(m["psnr"], "identical");
    assert!(m["fid"].as_f64().unwrap() <= 1e-4);
    assert_eq!(m["sync_offset"].as_f64(), Some(0.0));
}

#[test]
fn eval_two_entries_aggregate_is_mean() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let manifest = dir.path().join("m.json");
    std::fs::write(
        &manifest,
        r#"{"options": {"name": "demo"}, "entries": [
            {"id": "same", "gen_landmarks": "a.jsonl", "gt_landmarks": "a.jsonl"},
            {"id": "moved", "gen_landmarks": "b.jsonl", "gt_landmarks": "a.jsonl"}
        ]}"#,
    )
    .unwrap();
    let v = stdout_json(&fteval(&["eval", p(&manifest)]));
    assert_eq!(v["name"], "demo");
    let e0 = v["entries"][0]["metrics"]["f_lmd"].as_f64().unwrap();
    let e1 = v["entries"][1]["metrics"]["f_lmd"].as_f64().unwrap();
    assert_eq!((e0, e1), (0.0, 3.0));
    assert_eq!(v["aggregate"]["f_lmd"]["mean"].as_f64(), Some(1.5));
    let adfd: Vec<f64> = (0..2)
        .map(|i| v["entries"][i]["metrics"]["adfd"].as_f64().unwrap())
        .collect();
    let agg = v["aggregate"]["adfd"]["mean"].as_f64().unwrap();
    assert!((agg - (adfd[0] + adfd[1]) / 2.0).abs() <= 1e-6);
}

#[test]
fn eval_records_entry_failures() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let manifest = dir.path().join("m.json");
    std::fs::write(
        &manifest,
        r#"{"entries": [
            {"id": "ok", "gen_landmarks": "a.jsonl", "gt_landmarks": "a.jsonl"},
            {"id": "broken", "gen_landmarks": "missing.jsonl", "gt_landmarks": "a.jsonl"}
        ]}"#,
    )
    .unwrap();
    let v = stdout_json(&fteval(&["eval", p(&manifest)]));
    assert_eq!(v["metadata"]["failed_entries"].as_u64(), Some(1));
    assert!(v["entries"][1]["metrics"]["adfd"]["error"].as_str().unwrap().contains("missing.jsonl"));
    assert_eq!(v["aggregate"]["adfd"]["count"].as_u64(), Some(1));

    std::fs::write(
        &manifest,
        r#"{"entries": [{"id": "broken", "gen_landmarks": "missing.jsonl", "gt_landmarks": "a.jsonl"}]}"#,
    )
    .unwrap();
    assert_eq!(fteval(&["eval", p(&manifest)]).status.code(), Some(2));
    std::fs::write(&manifest, r#"{"entries": []}"#).unwrap();
    assert_eq!(fteval(&["eval", p(&manifest)]).status.code(), Some(2));
}

#[test]
fn eval_is_deterministic_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_demo_manifest(dir.path(), 4, 9).unwrap();
    let runs: Vec<Vec<u8>> = ["1", "3", "1"]
        .iter()
        .map(|jobs| {
            let out = fteval(&["eval", p(&manifest), "--jobs", jobs]);
            assert!(out.status.success());
            out.stdout
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn table_from_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_demo_manifest(dir.path(), 2, 1).unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(fteval(&["eval", p(&manifest), "--name", "A", "--out", p(&a)]).status.success());
    assert!(fteval(&["eval", p(&manifest), "--name", "B", "--w2", "0.5", "--out", p(&b)]).status.success());
    let text = std::fs::read_to_string(&a).unwrap();
    let report = MetricReport::from_json(&a, &text).unwrap();
    assert_eq!(report.to_json(), text);

    let md = fteval(&["table", p(&a), p(&b), "--format", "markdown"]);
    let md = String::from_utf8(md.stdout).unwrap();
    let rows: Vec<&str> = md.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[2].ends_with(&format!("**{}** |", report.mean("adfd").map(fteval::report::format_value).unwrap())));
    assert!(!rows[3].trim_end_matches(" |").rsplit(" | ").next().unwrap().contains("**"));

    let landmarks_only = dir.path().join("c.json");
    let m = dir.path().join("lm.json");
    std::fs::write(
        &m,
        r#"{"entries": [{"id": "x", "gen_landmarks": "pair000_gen.jsonl", "gt_landmarks": "pair000_gt.jsonl"}]}"#,
    )
    .unwrap();
    assert!(fteval(&["eval", p(&m), "--out", p(&landmarks_only)]).status.success());
    let out = fteval(&["table", p(&a), p(&landmarks_only)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fid"));
}

#[test]
fn synth_subcommands_write_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let lm = dir.path().join("s.jsonl");
    let csv = dir.path().join("s.csv");
    let feats = dir.path().join("f.ftev");
    let stream = dir.path().join("a.ftev");
    let delayed = dir.path().join("v.ftev");
    let frames = dir.path().join("frames");
    for args in [
        vec!["synth", "landmarks", "--frames", "5", "--jitter", "0.5", "--out", p(&lm)],
        vec!["synth", "landmarks", "--frames", "5", "--jitter", "0.5", "--out", p(&csv)],
        vec!["synth", "features", "--rows", "30", "--dim", "3", "--out", p(&feats)],
        vec!["synth", "stream", "--len", "60", "--dim", "8", "--out", p(&stream)],
        vec!["synth", "stream", "--len", "60", "--dim", "8", "--delay", "-4", "--out", p(&delayed)],
        vec!["synth", "frames", "--frames", "2", "--width", "16", "--height", "16", "--out", p(&frames)],
    ] {
        let out = fteval(&args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let a = stdout_json(&fteval(&[
        "adfd", "--gen", p(&csv), "--gt", p(&lm), "--csv-width", "256", "--csv-height", "256",
    ]));
    assert_eq!(a["score"].as_f64(), Some(1.0));
    let s = stdout_json(&fteval(&["sync", "--audio", p(&stream), "--visual", p(&delayed)]));
    assert_eq!(s["best_offset"].as_i64(), Some(-4));
    let s = stdout_json(&fteval(&["ssim", "--gen", p(&frames), "--gt", p(&frames)]));
    assert_eq!(s["mean"].as_f64(), Some(1.0));
}
