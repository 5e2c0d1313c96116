use std::path::Path;
use std::process::{Command, Output};

use osal_core::harness::{metrics_file_name, summarize, Split, Strategy, Summary, SUMMARY_FILE};
use osal_core::io;

fn osal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn gen(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["gen", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    osal(&args)
}

const SMALL: [&str; 12] = [
    "--known",
    "3",
    "--unknown",
    "4",
    "--dim",
    "6",
    "--per-class",
    "40",
    "--sep",
    "8",
    "--seed",
    "5",
];

#[test]
fn gen_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(gen(&a, &SMALL).status.success());
    assert!(gen(&b, &SMALL).status.success());
    for f in ["features.e2fm", "labels.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }

    let c = dir.path().join("c");
    let mut other = SMALL;
    other[11] = "6";
    assert!(gen(&c, &other).status.success());
    assert_ne!(
        std::fs::read(a.join("features.e2fm")).unwrap(),
        std::fs::read(c.join("features.e2fm")).unwrap()
    );

    let data = io::load_dataset(&a.join("features.e2fm"), &a.join("labels.csv"), 3).unwrap();
    assert_eq!(data.features.len(), 7 * 40);
    assert_eq!(data.features.dim(), 6);
    assert_eq!(
        data.split.iter().filter(|&&s| s == Split::Test).count(),
        7 * 8
    );
}

#[test]
fn bad_magic_is_reported_with_file_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    assert!(gen(&out, &SMALL).status.success());
    let features = out.join("features.e2fm");
    let mut bytes = std::fs::read(&features).unwrap();
    bytes[..4].copy_from_slice(b"NOPE");
    std::fs::write(&features, bytes).unwrap();

    let res = osal(&[
        "estimate",
        "--features",
        features.to_str().unwrap(),
        "--labels",
        out.join("labels.csv").to_str().unwrap(),
        "--k",
        "3",
        "--umax",
        "20",
        "--seed",
        "1",
    ]);
    assert!(!res.status.success());
    let err = String::from_utf8(res.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
    assert!(
        err.contains("features.e2fm") && err.contains("\"E2FM\""),
        "{err}"
    );
}

#[test]
fn estimate_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    assert!(gen(&out, &SMALL).status.success());
    let res = osal(&[
        "estimate",
        "--features",
        out.join("features.e2fm").to_str().unwrap(),
        "--labels",
        out.join("labels.csv").to_str().unwrap(),
        "--k",
        "3",
        "--umax",
        "15",
        "--seed",
        "2",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    let u_hat = v["u_hat"].as_u64().unwrap();
    assert!((4..=15).contains(&u_hat), "{v}");
    let score = v["score"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&score));
}

fn write_config(dir: &Path, body: serde_json::Value) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body.to_string()).unwrap();
    path
}

#[test]
fn run_writes_one_csv_per_cell_and_a_matching_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(
        dir.path(),
        serde_json::json!({
            "data": {"synthetic": {"known_classes": 3, "unknown_classes": 4, "dim": 6,
                     "samples_per_class": 40, "cluster_separation": 6.0}},
            "strategies": ["e2oal", "random"],
            "seeds": [1, 2, 3],
            "rounds": 3,
            "budget": 10,
            "u_max": 12,
            "epochs": 10,
            "output_dir": out,
        }),
    );
    let res = osal(&["run", "--config", config.to_str().unwrap()]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );

    let entries: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(entries.iter().filter(|e| e.ends_with(".csv")).count(), 6);
    assert!(entries.iter().any(|e| e == SUMMARY_FILE));

    let mut cells = std::collections::BTreeMap::new();
    for strategy in [Strategy::E2oal, Strategy::Random] {
        for seed in [1u64, 2, 3] {
            let rows = io::read_metrics(&out.join(metrics_file_name(strategy, seed))).unwrap();
            assert_eq!(rows.len(), 3);
            assert_eq!(
                rows.iter().map(|r| r.round).collect::<Vec<_>>(),
                vec![1, 2, 3]
            );
            cells
                .entry(strategy)
                .or_insert_with(Vec::new)
                .push((seed, rows));
        }
    }
    let written: Summary =
        serde_json::from_str(&std::fs::read_to_string(out.join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(written, summarize(&cells));
    let printed: Summary = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(printed, written);

    // same config again: same summary
    let again = osal(&["run", "--config", config.to_str().unwrap()]);
    assert!(again.status.success());
    let rerun: Summary =
        serde_json::from_str(&std::fs::read_to_string(out.join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(rerun, written);
}

#[test]
fn config_errors_are_one_line_and_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        serde_json::json!({
            "data": {"synthetic": {"known_classes": 3, "unknown_classes": 4, "dim": 6,
                     "samples_per_class": 40, "cluster_separation": 6.0}},
            "strategies": ["e2oal", "coreset"],
            "seeds": [1],
            "output_dir": dir.path().join("out"),
        }),
    );
    let res = osal(&["run", "--config", config.to_str().unwrap()]);
    assert!(!res.status.success());
    let err = String::from_utf8(res.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("coreset"), "{err}");

    let missing = osal(&[
        "run",
        "--config",
        dir.path().join("nope.json").to_str().unwrap(),
    ]);
    assert!(!missing.status.success());
    assert!(String::from_utf8(missing.stderr)
        .unwrap()
        .contains("nope.json"));
}
