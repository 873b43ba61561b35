mod common;

use std::path::Path;

use common::{cusplit, ok, write_spec};
use cusplit_core::codec::read_raw;
use cusplit_core::eval::{BenchReport, REPORT_COLUMNS};
use cusplit_core::features::{correlation_table, Provenance};
use cusplit_core::{Dataset, DecisionTree, FeatureVector, Sample};

fn small_sequence(dir: &Path, name: &str, seed: u64) -> String {
    let spec = write_spec(dir, name, "mixed", 128, 128, 3, seed);
    ok(
        dir,
        &[
            "generate",
            "--spec",
            spec.to_str().unwrap(),
            "--out-dir",
            "seq",
        ],
    );
    format!("seq/{name}.hdr")
}

#[test]
fn flat_spec_gives_constant_frames_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "plain", "flat", 128, 64, 4, 3);
    ok(
        dir.path(),
        &[
            "generate",
            "--spec",
            spec.to_str().unwrap(),
            "--out-dir",
            "out",
        ],
    );
    let (_, frames) = read_raw(&dir.path().join("out/plain.hdr")).unwrap();
    assert_eq!(frames.len(), 4);
    for f in &frames {
        assert!(f.luma().iter().all(|&v| v == f.luma()[0]));
    }
    let raw = std::fs::read(dir.path().join("out/plain.y")).unwrap();
    ok(dir.path(), &["rerun", "out/generate.manifest.json"]);
    assert_eq!(std::fs::read(dir.path().join("out/plain.y")).unwrap(), raw);
}

#[test]
fn bad_dimensions_fail_with_data_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "odd", "noise", 100, 64, 2, 1);
    let out = cusplit(
        dir.path(),
        &[
            "generate",
            "--spec",
            spec.to_str().unwrap(),
            "--out-dir",
            "out",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("multiples of 64"));
}

#[test]
fn extract_covers_every_qp_and_refuses_overwrites() {
    let dir = tempfile::tempdir().unwrap();
    let seq = small_sequence(dir.path(), "one", 5);
    ok(
        dir.path(),
        &["extract", "--sequence", &seq, "--out", "ds.csv"],
    );
    let ds = Dataset::import(&dir.path().join("ds.csv")).unwrap();
    let pairs: std::collections::BTreeSet<(String, u8)> = ds
        .samples()
        .iter()
        .map(|s| (s.provenance.sequence_id.clone(), s.provenance.base_qp))
        .collect();
    assert_eq!(pairs.len(), 4);
    assert_eq!(
        pairs.iter().map(|p| p.1).collect::<Vec<_>>(),
        vec![22, 27, 32, 37]
    );

    let again = dir.path().join("again.csv");
    ds.export(&again).unwrap();
    assert_eq!(Dataset::import(&again).unwrap(), ds);

    let out = cusplit(
        dir.path(),
        &["extract", "--sequence", &seq, "--out", "ds.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    ok(
        dir.path(),
        &["extract", "--sequence", &seq, "--out", "ds.csv", "--force"],
    );

    let out = cusplit(dir.path(), &["extract", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_records_defaults_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let seq = small_sequence(dir.path(), "t", 6);
    ok(
        dir.path(),
        &["extract", "--sequence", &seq, "--out", "ds.csv"],
    );
    let out = cusplit(
        dir.path(),
        &["train", "--dataset", "ds.csv", "--out-dir", "m1"],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: only"));
    ok(
        dir.path(),
        &["train", "--dataset", "ds.csv", "--out-dir", "m2"],
    );
    for d in 0..3 {
        let t = DecisionTree::load(&dir.path().join(format!("m1/depth{d}.json"))).unwrap();
        assert_eq!(t.cu_depth, d);
        assert_eq!(t.constraints.max_depth, 5);
        assert_eq!(t.constraints.min_leaf_fraction, 0.001);
    }
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("m1/kfold.json"), read("m2/kfold.json"));
}

#[test]
fn prune_writes_thresholds_plot_data_and_signals_empty_results() {
    let dir = tempfile::tempdir().unwrap();
    let seq = small_sequence(dir.path(), "p", 7);
    ok(
        dir.path(),
        &["extract", "--sequence", &seq, "--out", "ds.csv"],
    );
    ok(
        dir.path(),
        &["train", "--dataset", "ds.csv", "--out-dir", "m"],
    );
    let models = ["m/depth0.json", "m/depth1.json", "m/depth2.json"];

    let mut args = vec![
        "prune",
        "--out-dir",
        "c",
        "--min-accuracy",
        "60",
        "--min-coverage",
        "5",
        "--model",
    ];
    args.extend(models);
    ok(dir.path(), &args);
    let header = std::fs::read_to_string(dir.path().join("c/criteria.txt")).unwrap();
    assert!(header.contains("min_accuracy=60 min_coverage=5"));

    let mut args = vec!["prune", "--out-dir", "d", "--model"];
    args.extend(models);
    let out = cusplit(dir.path(), &args);
    if out.status.success() {
        let text = std::fs::read_to_string(dir.path().join("d/criteria.txt")).unwrap();
        assert!(text.contains("min_accuracy=97 min_coverage=17"));
    } else {
        assert_eq!(out.status.code(), Some(4));
    }

    let mut args = vec![
        "prune",
        "--out-dir",
        "e",
        "--min-accuracy",
        "100",
        "--min-coverage",
        "100",
        "--model",
    ];
    args.extend(models);
    let out = cusplit(dir.path(), &args);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lower the thresholds"));

    let dat = std::fs::read_to_string(dir.path().join("e/plot_depth1.dat")).unwrap();
    let rows: Vec<&str> = dat.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(!rows.is_empty());
    for r in rows {
        let cols: Vec<f64> = r.split_whitespace().map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 7);
    }
}

#[test]
fn bench_without_criteria_has_zero_deltas_and_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let seq = small_sequence(dir.path(), "b", 8);
    ok(
        dir.path(),
        &[
            "bench",
            "--sequence",
            &seq,
            "--out-dir",
            "r",
            "--qps",
            "22,32",
        ],
    );
    let csv = std::fs::read_to_string(dir.path().join("r/report.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), REPORT_COLUMNS.join(","));
    let report: BenchReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r/report.json")).unwrap())
            .unwrap();
    assert_eq!(report.average.mode_eval_delta_pct, 0.0);
    assert_eq!(report.average.recursion_delta_pct, 0.0);
    assert_eq!(report.anchor, report.test);
    assert!(dir.path().join("r/timing.csv").exists());
}

#[test]
fn correlate_matches_library_and_marks_undefined_cells() {
    let dir = tempfile::tempdir().unwrap();
    let samples: Vec<Sample> = (0..60)
        .map(|i| Sample {
            features: FeatureVector {
                sf: false,
                cbf: i % 2 == 0,
                rdc: i as f64 * 3.0,
                bits: (i % 7) as f64,
                and: (i % 4) as f64 / 2.0,
                qp: 23 + (i % 3) as u8,
                lambda: 10.0 + (i % 3) as f64,
                qpo: 1 + (i % 4) as u8,
                pm: (i % 3) as u8,
            },
            depth: (i % 3) as u8,
            label: i % 5 < 2,
            provenance: Provenance {
                sequence_id: "hand".into(),
                base_qp: 22,
                frame_index: 1,
                cu_x: i,
                cu_y: 0,
            },
        })
        .collect();
    let ds = Dataset::new(samples).unwrap();
    ds.export(&dir.path().join("ds.csv")).unwrap();
    let text = ok(dir.path(), &["correlate", "--dataset", "ds.csv"]);
    assert_eq!(text, correlation_table(&ds).to_text());
    assert_eq!(text.lines().count(), 4);
    // SF is constant.
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.split_whitespace().nth(1) == Some("n/a")));
    ok(
        dir.path(),
        &[
            "correlate",
            "--dataset",
            "ds.csv",
            "--csv",
            "--out",
            "t.csv",
        ],
    );
    assert_eq!(
        std::fs::read_to_string(dir.path().join("t.csv")).unwrap(),
        correlation_table(&ds).to_csv()
    );
    assert!(dir.path().join("t.csv.manifest.json").exists());
}
