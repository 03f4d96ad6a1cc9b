//! `train` and `noise-sweep`: data loading, training runs and their outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::Utc;
use qcnn::architect::{estimate_resources, plan_architecture, PaddingMethod, ResourceReport};
use qcnn::datapipe::{
    concat_datasets, encoding_for, load_mnist, load_table, load_wdbc, make_splits, qubits_for, PadMode, Preprocess, RawDataset,
    SplitSpec, Splits, KDE_BANDWIDTH_RULE,
};
use qcnn::noise::DeviceNoiseProfile;
use qcnn::trainer::{train_with, Executor, Metrics, TrainReport, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
use qcnn::QcnnError;
use serde::Serialize;

use crate::config::{DatasetKind, ExecutorConfig, ExperimentConfig};
use crate::error::{CliError, CliResult};

pub const METRICS_FILE: &str = "metrics.csv";
pub const PARAMS_FILE: &str = "params.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_FILE: &str = "sweep.csv";

/// A loaded dataset and the files it came from.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: RawDataset,
    pub files: Vec<PathBuf>,
}

fn data_err(path: &Path, e: QcnnError) -> CliError {
    match e {
        QcnnError::Io { path, source } => CliError::Data {
            path,
            message: source.to_string(),
        },
        other => CliError::Data {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

fn existing(path: PathBuf) -> CliResult<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Data {
            message: "file not found".into(),
            path,
        })
    }
}

/// `dir/stem`, or `dir/stem.gz` when only the compressed file exists.
fn mnist_file(dir: &Path, stem: &str) -> Option<PathBuf> {
    [dir.join(stem), dir.join(format!("{stem}.gz"))].into_iter().find(|p| p.is_file())
}

/// Paths the dataset will be read from; fails with a data error naming the
/// first missing file.
pub fn dataset_files(config: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let path = config
        .dataset
        .path
        .clone()
        .ok_or_else(|| CliError::config("dataset path is not set"))?;
    match config.dataset.kind {
        DatasetKind::Mnist => {
            let mut files = Vec::new();
            for (images, labels, required) in [
                ("train-images-idx3-ubyte", "train-labels-idx1-ubyte", true),
                ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", false),
            ] {
                match (mnist_file(&path, images), mnist_file(&path, labels)) {
                    (Some(i), Some(l)) => files.extend([i, l]),
                    (i, _) if required => {
                        return Err(CliError::Data {
                            path: path.join(if i.is_none() { images } else { labels }),
                            message: "file not found".into(),
                        })
                    }
                    _ => {}
                }
            }
            Ok(files)
        }
        DatasetKind::Wdbc | DatasetKind::Table => Ok(vec![existing(path)?]),
    }
}

/// Reads the configured dataset. MNIST's training and test files are
/// concatenated into one pool that the splits draw from.
pub fn load_data(config: &ExperimentConfig) -> CliResult<LoadedData> {
    let files = dataset_files(config)?;
    let dataset = match config.dataset.kind {
        DatasetKind::Mnist => {
            let mut parts = files.chunks(2).map(|p| load_mnist(&p[0], &p[1]).map_err(|e| data_err(&p[0], e)));
            let first = parts.next().expect("train files present")?;
            parts.try_fold(first, |acc, next| Ok::<_, CliError>(concat_datasets(acc, next?)))?
        }
        DatasetKind::Wdbc => load_wdbc(&files[0]).map_err(|e| data_err(&files[0], e))?,
        DatasetKind::Table => load_table(&files[0]).map_err(|e| data_err(&files[0], e))?,
    };
    Ok(LoadedData { dataset, files })
}

/// How one padding method sees the data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Encoding {
    pub features: usize,
    pub input_qubits: usize,
    pub pad_mode: PadMode,
    pub target_qubits: usize,
}

pub fn preprocess_for(config: &ExperimentConfig) -> Preprocess {
    match config.dataset.kind {
        DatasetKind::Mnist => Preprocess::Pca {
            components: config.features_hint().expect("MNIST has a component count"),
        },
        DatasetKind::Wdbc => Preprocess::Kde,
        DatasetKind::Table => Preprocess::None,
    }
}

pub fn encoding(config: &ExperimentConfig, data: &LoadedData, method: PaddingMethod) -> CliResult<Encoding> {
    let features = match config.features_hint() {
        Some(f) => f,
        None => data
            .dataset
            .samples
            .first()
            .map(|s| s.features.len())
            .ok_or_else(|| CliError::config("dataset is empty"))?,
    };
    let input_qubits = qubits_for(features);
    if input_qubits < 2 {
        return Err(CliError::config(format!("{features} features need at least 3 for a 2-qubit circuit")));
    }
    let (pad_mode, target_qubits) = encoding_for(method, features);
    Ok(Encoding {
        features,
        input_qubits,
        pad_mode,
        target_qubits,
    })
}

pub fn build_splits(config: &ExperimentConfig, data: &LoadedData, enc: &Encoding) -> CliResult<Splits> {
    let spec = SplitSpec {
        train: config.splits.train,
        validation: config.splits.validation,
        test: config.splits.test,
        seed: config.splits.seed,
        labels: config.labels,
        preprocess: preprocess_for(config),
        pad_mode: enc.pad_mode,
        target_qubits: enc.target_qubits,
    };
    make_splits(&data.dataset, &spec).map_err(|e| match e {
        QcnnError::Argument(m) => CliError::config(m),
        other => other.into(),
    })
}

/// Writes `bytes` to a temporary file beside `path`, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let out = |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(out)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(out)?;
    tmp.write_all(bytes).map_err(out)?;
    tmp.persist(path).map_err(|e| out(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub init: &'static str,
    pub label_map: [(i64, i8); 2],
    pub prediction_rule: &'static str,
    pub accuracy_std: &'static str,
    pub preprocessing_fit: &'static str,
    pub kde_bandwidth_rule: &'static str,
    pub adam: [f64; 3],
    pub restart_rng: &'static str,
    pub mnist_pool: &'static str,
}

impl Conventions {
    pub fn new(labels: [i64; 2]) -> Self {
        Conventions {
            init: "iid uniform [0, 2pi)",
            label_map: [(labels[0], 1), (labels[1], -1)],
            prediction_rule: "sign(f), f = 0 -> +1",
            accuracy_std: "population",
            preprocessing_fit: "training split only",
            kde_bandwidth_rule: KDE_BANDWIDTH_RULE,
            adam: [ADAM_BETA1, ADAM_BETA2, ADAM_EPS],
            restart_rng: "ChaCha8 keyed by training seed, stream = restart index",
            mnist_pool: "train and t10k files concatenated before splitting",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartSummary {
    pub method: PaddingMethod,
    pub scale: Option<f64>,
    pub restart: usize,
    pub test_accuracy: f64,
    pub wall_time_s: f64,
}

/// Everything needed to rerun an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub library_version: &'static str,
    pub config: ExperimentConfig,
    pub data_files: Vec<PathBuf>,
    pub samples_loaded: usize,
    pub encodings: Vec<(PaddingMethod, Encoding)>,
    pub resources: Vec<(PaddingMethod, ResourceReport)>,
    pub conventions: Conventions,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: String,
    pub wall_time_s: f64,
    pub restarts: Vec<RestartSummary>,
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn joined(values: impl Iterator<Item = String>) -> String {
    values.collect::<Vec<_>>().join(";")
}

pub const METRICS_HEADER: [&str; 8] = [
    "kind",
    "restart",
    "seed",
    "test_accuracy",
    "test_accuracy_std",
    "final_train_loss",
    "train_losses",
    "validation_accuracies",
];

fn metrics_rows(report: &TrainReport, seed: u64) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = report
        .restarts
        .iter()
        .map(|m| {
            vec![
                "restart".into(),
                m.restart.to_string(),
                seed.to_string(),
                m.test_accuracy.to_string(),
                String::new(),
                m.epochs.last().map_or(String::new(), |e| e.train_loss.to_string()),
                joined(m.epochs.iter().map(|e| e.train_loss.to_string())),
                joined(m.epochs.iter().map(|e| e.validation_accuracy.map_or(String::new(), |v| v.to_string()))),
            ]
        })
        .collect();
    rows.push(vec![
        "summary".into(),
        String::new(),
        seed.to_string(),
        report.mean_test_accuracy.to_string(),
        report.std_test_accuracy.to_string(),
        String::new(),
        String::new(),
        String::new(),
    ]);
    rows
}

#[derive(Debug, Clone, Serialize)]
struct ParamsFile<'a> {
    method: PaddingMethod,
    scale: Option<f64>,
    restart: usize,
    values: &'a [f64],
}

/// One trained configuration: a method at a noise scale.
#[derive(Debug, Clone)]
pub struct Cell {
    pub method: PaddingMethod,
    pub scale: Option<f64>,
    pub report: TrainReport,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub cells: Vec<Cell>,
    pub manifest: RunManifest,
}

fn progress(label: &str, total: usize) -> impl FnMut(&Metrics) {
    let label = label.to_string();
    move |m: &Metrics| {
        eprintln!(
            "[{label}] restart {}/{total}: test accuracy {:.4} ({:.1} s)",
            m.restart + 1,
            m.test_accuracy,
            m.wall_time_s
        )
    }
}

fn executor_for(profile: Option<DeviceNoiseProfile>) -> Executor {
    match profile {
        Some(profile) => Executor::Noisy { profile },
        None => Executor::Noiseless,
    }
}

fn run_cells(
    command: &'static str,
    config: &ExperimentConfig,
    methods: &[PaddingMethod],
    scales: &[Option<f64>],
) -> CliResult<RunOutput> {
    config.validate()?;
    let started_at = Utc::now().to_rfc3339();
    let start = Instant::now();
    let data = load_data(config)?;

    let mut encodings = Vec::new();
    let mut resources = Vec::new();
    let mut prepared = Vec::new();
    for &method in methods {
        let enc = encoding(config, &data, method)?;
        let arch = config.architecture(method, enc.input_qubits)?;
        let circuit = plan_architecture(&arch)?;
        resources.push((method, estimate_resources(&arch)?));
        let splits = build_splits(config, &data, &enc)?;
        encodings.push((method, enc));
        prepared.push((method, circuit, splits));
    }

    let mut cells = Vec::new();
    let mut restarts = Vec::new();
    for (method, circuit, splits) in &prepared {
        for &scale in scales {
            let profile = match scale {
                Some(s) => config.scaled_profile(s)?,
                None => None,
            };
            let label = match scale {
                Some(s) => format!("{method} x{s}"),
                None => method.to_string(),
            };
            let report = train_with(
                circuit,
                splits,
                &config.training,
                &executor_for(profile),
                progress(&label, config.training.restarts),
            )?;
            restarts.extend(report.restarts.iter().map(|m| RestartSummary {
                method: *method,
                scale,
                restart: m.restart,
                test_accuracy: m.test_accuracy,
                wall_time_s: m.wall_time_s,
            }));
            eprintln!(
                "[{label}] mean test accuracy {:.4} +- {:.4}",
                report.mean_test_accuracy, report.std_test_accuracy
            );
            cells.push(Cell {
                method: *method,
                scale,
                report,
            });
        }
    }

    let manifest = RunManifest {
        command,
        library_version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        data_files: data.files.clone(),
        samples_loaded: data.dataset.samples.len(),
        encodings,
        resources,
        conventions: Conventions::new(config.labels),
        threads: rayon::current_num_threads(),
        started_at,
        finished_at: Utc::now().to_rfc3339(),
        wall_time_s: start.elapsed().as_secs_f64(),
        restarts,
    };
    Ok(RunOutput { cells, manifest })
}

fn write_params(dir: &Path, cells: &[Cell]) -> CliResult<()> {
    let params: Vec<ParamsFile> = cells
        .iter()
        .flat_map(|c| {
            c.report.restarts.iter().map(move |m| ParamsFile {
                method: c.method,
                scale: c.scale,
                restart: m.restart,
                values: &m.params.values,
            })
        })
        .collect();
    write_atomic(&dir.join(PARAMS_FILE), &to_json(&params))
}

/// Trains `config.method` (at the first configured noise scale when noisy)
/// and writes `metrics.csv`, `params.json` and `manifest.json`.
pub fn run_train(config: &ExperimentConfig) -> CliResult<RunOutput> {
    let scale = match &config.executor {
        ExecutorConfig::Noiseless => None,
        ExecutorConfig::Noisy { scales, .. } => Some(scales.first().copied().unwrap_or(1.0)),
    };
    let out = run_cells("train", config, &[config.method], &[scale])?;
    let dir = &config.output_dir;
    write_atomic(
        &dir.join(METRICS_FILE),
        &csv_bytes(&METRICS_HEADER, &metrics_rows(&out.cells[0].report, config.training.seed)),
    )?;
    write_params(dir, &out.cells)?;
    write_atomic(&dir.join(MANIFEST_FILE), &to_json(&out.manifest))?;
    Ok(out)
}

pub const SWEEP_HEADER: [&str; 7] = ["kind", "method", "scale", "restart", "seed", "test_accuracy", "test_accuracy_std"];

/// Trains every configured method at every noise scale and writes
/// `sweep.csv`, `params.json` and `manifest.json`.
pub fn run_noise_sweep(config: &ExperimentConfig, scales: Option<&[f64]>) -> CliResult<RunOutput> {
    let mut config = config.clone();
    match &mut config.executor {
        ExecutorConfig::Noiseless => {
            return Err(CliError::config("noise-sweep needs a noisy executor in the config"));
        }
        ExecutorConfig::Noisy { scales: s, .. } => {
            if let Some(over) = scales {
                *s = over.to_vec();
            }
        }
    }
    let scales: Vec<Option<f64>> = match &config.executor {
        ExecutorConfig::Noisy { scales, .. } => scales.iter().copied().map(Some).collect(),
        ExecutorConfig::Noiseless => unreachable!(),
    };
    let methods = config.methods.clone();
    let out = run_cells("noise-sweep", &config, &methods, &scales)?;

    let seed = config.training.seed.to_string();
    let mut rows = Vec::new();
    for c in &out.cells {
        let scale = c.scale.map_or(String::new(), |s| s.to_string());
        for m in &c.report.restarts {
            rows.push(vec![
                "restart".into(),
                c.method.to_string(),
                scale.clone(),
                m.restart.to_string(),
                seed.clone(),
                m.test_accuracy.to_string(),
                String::new(),
            ]);
        }
        rows.push(vec![
            "summary".into(),
            c.method.to_string(),
            scale,
            String::new(),
            seed.clone(),
            c.report.mean_test_accuracy.to_string(),
            c.report.std_test_accuracy.to_string(),
        ]);
    }
    let dir = &config.output_dir;
    write_atomic(&dir.join(SWEEP_FILE), &csv_bytes(&SWEEP_HEADER, &rows))?;
    write_params(dir, &out.cells)?;
    write_atomic(&dir.join(MANIFEST_FILE), &to_json(&out.manifest))?;
    Ok(out)
}
