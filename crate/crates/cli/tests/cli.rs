use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn qcnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcnn")).args(args).output().expect("binary runs")
}

/// Two classes on the unit circle in the plane of the first two features,
/// separated by the sign of the second.
fn write_toy_table(path: &Path, n: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out = String::from("label,x0,x1,x2,x3\n");
    for i in 0..n {
        let label = (i % 2) as i64;
        let sign = if label == 0 { 1.0 } else { -1.0 };
        let a: f64 = rng.random_range(0.2..1.3) * sign;
        out.push_str(&format!("{label},{},{},0,0\n", a.cos(), a.sin()));
    }
    fs::write(path, out).unwrap();
}

fn toy_config(dir: &Path, extra: &str) -> PathBuf {
    write_toy_table(&dir.join("toy.csv"), 200);
    let path = dir.join("config.json");
    fs::write(
        &path,
        format!(
            r#"{{
  "dataset": {{"kind": "table", "path": "toy.csv"}},
  "labels": [0, 1],
  "method": "skip-pooling",
  "ansatz": 1,
  "training": {{"epochs": 5, "restarts": 2, "seed": 3, "batch_size": 10, "learning_rate": 0.1}},
  "splits": {{"train": 120, "validation": 20, "test": 40, "seed": 1}},
  {extra}
  "output_dir": "out"
}}"#
        ),
    )
    .unwrap();
    path
}

#[test]
fn toy_training_reaches_full_accuracy_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path(), "");
    let out = qcnn(&["--jobs", "1", "train", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out_dir = dir.path().join("out");
    let metrics = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    let summary = metrics.lines().last().unwrap();
    assert!(summary.starts_with("summary,,3,1,0,"), "{summary}");
    assert!(metrics.starts_with("kind,restart,seed,test_accuracy,test_accuracy_std"));

    let manifest = out_dir.join("manifest.json");
    let rerun = dir.path().join("rerun");
    let out = qcnn(&[
        "--jobs",
        "2",
        "train",
        "--config",
        manifest.to_str().unwrap(),
        "--output-dir",
        rerun.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(out_dir.join("metrics.csv")).unwrap(), fs::read(rerun.join("metrics.csv")).unwrap());
    assert_eq!(fs::read(out_dir.join("params.json")).unwrap(), fs::read(rerun.join("params.json")).unwrap());
}

#[test]
fn noise_sweep_covers_requested_scales() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path(), r#""executor": {"kind": "noisy", "scales": [1]},"#);
    let out = qcnn(&["noise-sweep", "--config", config.to_str().unwrap(), "--scales", "1,2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let mut scales: Vec<&str> = sweep.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    scales.sort_unstable();
    scales.dedup();
    assert_eq!(scales, vec!["1", "2"]);
    // two methods x two scales x (two restarts + summary)
    assert_eq!(sweep.lines().count(), 1 + 2 * 2 * 3);
}

#[test]
fn noise_sweep_rejects_noiseless_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path(), "");
    let out = qcnn(&["noise-sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path(), "");
    fs::remove_file(dir.path().join("toy.csv")).unwrap();
    let out = qcnn(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("toy.csv"));

    let mnist = dir.path().join("mnist.json");
    fs::write(
        &mnist,
        r#"{"dataset":{"kind":"mnist","path":"nowhere"},"labels":[0,1],"splits":{"train":10,"test":5},"training":{"batch_size":5},"output_dir":"o"}"#,
    )
    .unwrap();
    let out = qcnn(&["train", "--config", mnist.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train-images-idx3-ubyte"));
}

#[test]
fn invalid_configs_exit_with_two_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"dataset":{"kind":"wdbc"},"labels":[1,0],"splits":{"train":10,"test":5},"output_dir":"o"}"#,
        r#"{"dataset":{"kind":"wdbc"},"labels":[1,1],"splits":{"train":100,"test":5},"output_dir":"o"}"#,
        r#"{"dataset":{"kind":"wdbc"},"labels":[1,0],"method":"magic","splits":{"train":100,"test":5},"output_dir":"o"}"#,
        r#"{"dataset":{"kind":"wdbc"},"labels":[1,0],"splits":{"train":100,"test":5},"executor":{"kind":"noisy","scales":[0.5]},"output_dir":"o"}"#,
        "not json",
    ];
    for (i, text) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.json"));
        fs::write(&path, text).unwrap();
        let start = std::time::Instant::now();
        let out = qcnn(&["train", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(start.elapsed().as_secs_f64() < 1.0);
    }
    let out = qcnn(&["train", "--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn split_shortfall_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path(), "");
    let text = fs::read_to_string(&config).unwrap().replace(r#""train": 120"#, r#""train": 500"#);
    fs::write(&config, text).unwrap();
    let out = qcnn(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("short by"));
}

#[test]
fn resources_flags() {
    let out = qcnn(&["resources", "--qubits", "8", "--ansatz", "2", "--sharing", "--format", "json"]);
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r["depth"] == rows[0]["depth"] && r["params"] == rows[0]["params_shared"]));
    assert_eq!(qcnn(&["resources", "--qubits", "5", "--ansatz", "3"]).status.code(), Some(2));
    assert_eq!(qcnn(&["resources", "--range", "9..4"]).status.code(), Some(2));
    assert_eq!(qcnn(&["resources", "--qubits", "5", "--reps", "1,1"]).status.code(), Some(2));
}

#[test]
fn bundled_configs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let config = qcnn_cli::config::load_config(&path).unwrap();
        config.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 3);
}
