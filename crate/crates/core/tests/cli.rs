use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csimap::cli::{RunConfig, RESOLVED_CONFIG};

fn csimap(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csimap"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

const SMALL: &str = r#"{
  "data": {"kind": "synth", "scene": {"scatterers": 4}, "num_points": 200},
  "estimators": [{"kind": "dnn"}, {"kind": "principal_component"}, {"kind": "random"}],
  "train": {"epochs": 2, "batch_size": 32},
  "split": {"kind": "checkerboard", "square_side": 1.0},
  "sweep": {"a_values": [0.7, 1.3]},
  "baseline": {"random_draws": 1000}
}"#;

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn synth_then_validate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL);
    let o = csimap(&["synth", "--config", cfg.to_str().unwrap(), "--out", "gen"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = csimap(&["validate", "gen/dataset.csi"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("records: 200"));

    let bytes = fs::read(tmp.path().join("gen/dataset.csi")).unwrap();
    fs::write(tmp.path().join("gen/cut.csi"), &bytes[..bytes.len() - 5]).unwrap();
    fs::copy(tmp.path().join("gen/dataset.json"), tmp.path().join("gen/cut.json")).unwrap();
    let o = csimap(&["validate", "gen/cut.csi"], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("record 199"));

    // the generated file can drive the other commands
    let file_cfg = write_config(
        tmp.path(),
        "f.json",
        r#"{"data": {"kind": "file", "path": "gen/dataset.csi"}, "estimators": [{"kind": "principal_component"}],
            "split": {"kind": "checkerboard", "square_side": 1.0}}"#,
    );
    let o = csimap(&["train-eval", "--config", file_cfg.to_str().unwrap(), "--out", "fe"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"dl_index": 4}"#,
        r#"{"split": {"kind": "checkerboard", "square_side": 0.0}}"#,
        r#"{"sweep": {"a_values": [0.5, -1.0]}}"#,
        r#"{"estimators": [{"kind": "gradient_boosting"}]}"#,
        r#"{"estimators": [{"kind": "dnn", "train": {"epochs": 0}}]}"#,
        r#"{"unknown_field": true}"#,
        r#"{"train": {"learning_rate": -1}}"#,
        "not json",
    ];
    for (k, json) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{k}.json"), json);
        let o = csimap(&["baseline", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
        assert_eq!(code(&o), 2, "{json}: {}", String::from_utf8_lossy(&o.stderr));
    }
    // validation happens before any output is written
    assert!(!tmp.path().join("o").exists());
    let none = write_config(tmp.path(), "none.json", r#"{"estimators": []}"#);
    let o = csimap(&["sweep", "--config", none.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(code(&o), 2);
    let o = csimap(&["train-eval", "--config", "missing.json", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 2);
    let o = csimap(&["baseline"], tmp.path());
    assert_eq!(code(&o), 2);
    let o = csimap(&["sweep", "--threads", "0", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 2);
    let o = csimap(&["synth", "--seed", "abc"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL);
    let c = cfg.to_str().unwrap();
    for cmd in ["train-eval", "sweep", "baseline", "heatmap"] {
        let a = csimap(&[cmd, "--config", c, "--out", "run", "--seed", "3"], tmp.path());
        assert_eq!(code(&a), 0, "{cmd}: {}", String::from_utf8_lossy(&a.stderr));
        let first = dir_files(&tmp.path().join("run"));
        fs::remove_dir_all(tmp.path().join("run")).unwrap();
        let b = csimap(&[cmd, "--config", c, "--out", "run", "--seed", "3"], tmp.path());
        assert_eq!(code(&b), 0);
        assert_eq!(first, dir_files(&tmp.path().join("run")), "{cmd}");
        assert_eq!(a.stdout, b.stdout);
        fs::remove_dir_all(tmp.path().join("run")).unwrap();
    }
    let s1 = csimap(&["train-eval", "--config", c, "--out", "s1", "--seed", "1"], tmp.path());
    let s2 = csimap(&["train-eval", "--config", c, "--out", "s2", "--seed", "2"], tmp.path());
    assert_eq!((code(&s1), code(&s2)), (0, 0));
    assert_ne!(
        fs::read(tmp.path().join("s1/report.csv")).unwrap(),
        fs::read(tmp.path().join("s2/report.csv")).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL);
    let c = cfg.to_str().unwrap();
    for (dir, threads) in [("t1", "1"), ("t3", "3")] {
        let o = csimap(&["sweep", "--config", c, "--out", dir, "--threads", threads], tmp.path());
        assert_eq!(code(&o), 0);
    }
    for f in ["sweep.csv", "sweep.svg", "sweep.json"] {
        assert_eq!(
            fs::read(tmp.path().join("t1").join(f)).unwrap(),
            fs::read(tmp.path().join("t3").join(f)).unwrap()
        );
    }
}

#[test]
fn resolved_config_records_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"data": {"kind": "synth", "num_points": 20}}"#);
    let o = csimap(&["baseline", "--config", cfg.to_str().unwrap(), "--out", "o", "--seed", "9"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("o").join(RESOLVED_CONFIG)).unwrap();
    for key in ["learning_rate", "a_values", "cell_size", "random_draws", "scene_seed", "position_seed", "ul_range"] {
        assert!(text.contains(key), "{key} missing");
    }
    let parsed = RunConfig::from_json(&text).unwrap();
    assert_eq!(parsed.seed, 9);
    assert_eq!(parsed.sweep.a_values.len(), 14);
    assert_eq!(parsed.clone().resolve(), parsed);
}

#[test]
fn baseline_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"data": {"kind": "synth", "num_points": 400}}"#);
    let o = csimap(&["baseline", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(code(&o), 0);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("o/baseline.json")).unwrap()).unwrap();
    let mc = json["random_monte_carlo"]["mean_db"].as_f64().unwrap();
    assert!((mc + 15.05).abs() < 0.2, "{mc}");
    assert_eq!(json["num_antennas"], 32);
    let csv = fs::read_to_string(tmp.path().join("o/baseline.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);

    let one = write_config(tmp.path(), "one.json", r#"{"data": {"kind": "synth", "num_points": 1}}"#);
    let o = csimap(&["baseline", "--config", one.to_str().unwrap(), "--out", "one"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("one/baseline.json")).unwrap()).unwrap();
    assert!(json["principal_component"]["all_db"].as_f64().unwrap().abs() < 1e-9);
    assert!(json["split"].is_null());
}

#[test]
fn default_sweep_has_fourteen_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"data": {"kind": "synth", "num_points": 500}, "estimators": [{"kind": "principal_component"}]}"#,
    );
    let o = csimap(&["sweep", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("o/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 15);
    let svg = fs::read_to_string(tmp.path().join("o/sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("TDD"));
}

#[test]
fn oversized_square_is_skipped_in_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"data": {"kind": "synth", "num_points": 200}, "estimators": [{"kind": "random"}],
            "split": {"kind": "checkerboard", "square_side": 1.0, "origin": [-100.0, -100.0]},
            "sweep": {"a_values": [0.5, 1000.0]}}"#,
    );
    let o = csimap(&["sweep", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("o/sweep.json")).unwrap()).unwrap();
    assert_eq!(json["skipped"][0]["a"], 1000.0);
    assert_eq!(fs::read_to_string(tmp.path().join("o/sweep.csv")).unwrap().lines().count(), 2);
}

#[test]
fn divergence_exits_with_four() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"data": {"kind": "synth", "num_points": 100},
            "estimators": [{"kind": "dnn", "train": {"epochs": 5, "learning_rate": 1e300, "optimizer": {"kind": "sgd"}}}],
            "split": {"kind": "random"}}"#,
    );
    let o = csimap(&["train-eval", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epoch"));
}

#[test]
fn train_eval_outputs_and_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"data": {"kind": "synth", "num_points": 200}, "precision": "f32",
            "estimators": [{"kind": "dnn", "dropout": 0.2}, {"kind": "encoder_decoder", "latent": {"mode": "azimuth_elevation"}}],
            "train": {"epochs": 2},
            "split": {"kind": "random", "train_fraction": 0.5, "seed": 1}}"#,
    );
    let o = csimap(&["train-eval", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("o");
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("estimator_id,train_db,test_db,combined_db\n"));
    assert_eq!(csv.lines().count(), 3);
    let points = fs::read_to_string(out.join("points_dnn_dropout_0.2.csv")).unwrap();
    assert_eq!(points.lines().count(), 201);
    for id in ["dnn_dropout_0.2", "encdec_azimuth_elevation"] {
        let arch: csimap::neural::Architecture =
            serde_json::from_slice(&fs::read(out.join(format!("{id}.arch.json"))).unwrap()).unwrap();
        let bytes = fs::read(out.join(format!("{id}.ckpt"))).unwrap();
        csimap::TrainedModel32::load(&bytes[..], &arch).unwrap();
    }
}

#[test]
fn heatmap_counts_match_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"data": {"kind": "synth", "num_points": 300}, "estimators": [{"kind": "principal_component"}],
            "heatmap": {"cell_size": 0.5, "fit_on": "train_side"}}"#,
    );
    let o = csimap(&["heatmap", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("o/heatmap_principal_component.csv")).unwrap();
    let total: usize = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 300);
    assert!(fs::read_to_string(tmp.path().join("o/heatmap_principal_component.svg")).unwrap().contains("dB"));
}
