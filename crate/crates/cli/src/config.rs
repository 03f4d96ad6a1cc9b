//! Experiment configuration files.
//!
//! Relative paths inside a config resolve against the config file's
//! directory. Dataset paths default to `$QCNN_DATA_DIR` (or `./data`):
//! `<root>/mnist/` for MNIST and `<root>/wdbc.data` for Breast Cancer.

use std::fs;
use std::path::{Path, PathBuf};

use qcnn::ansatz::AnsatzSet;
use qcnn::architect::{num_layers, ArchitectureConfig, PaddingMethod};
use qcnn::noise::{load_profile, scale_profile, DeviceNoiseProfile};
use qcnn::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const DATA_DIR_ENV: &str = "QCNN_DATA_DIR";
pub const MNIST_DEFAULT_COMPONENTS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Mnist,
    Wdbc,
    /// CSV of `label, feature...` rows, used as-is.
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// MNIST directory, or the CSV file for `wdbc` and `table`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// PCA components kept for MNIST.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    #[serde(default)]
    pub validation: usize,
    pub test: usize,
    /// Seed of the sample selection shuffle.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reps {
    Uniform(usize),
    PerLayer(Vec<usize>),
}

impl Default for Reps {
    fn default() -> Self {
        Reps::Uniform(1)
    }
}

impl Reps {
    pub fn for_qubits(&self, k: usize) -> Vec<usize> {
        match self {
            Reps::Uniform(l) => vec![*l; num_layers(k)],
            Reps::PerLayer(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ExecutorConfig {
    Noiseless,
    Noisy {
        /// Device profile JSON; the bundled IBMQ Jakarta averages when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        profile: Option<PathBuf>,
        /// Noise multipliers for sweeps; `train` uses the first.
        #[serde(default = "default_scales")]
        scales: Vec<f64>,
    },
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig::Noiseless
    }
}

fn default_scales() -> Vec<f64> {
    vec![1.0]
}

fn default_method() -> PaddingMethod {
    PaddingMethod::SingleAncilla
}

fn default_sweep_methods() -> Vec<PaddingMethod> {
    vec![PaddingMethod::SkipPooling, PaddingMethod::SingleAncilla]
}

fn default_ansatz() -> AnsatzSet {
    AnsatzSet::Two
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    /// The first label maps to +1, the second to -1.
    pub labels: [i64; 2],
    /// Padding method for `train`.
    #[serde(default = "default_method")]
    pub method: PaddingMethod,
    /// Padding methods compared by `noise-sweep`.
    #[serde(default = "default_sweep_methods")]
    pub methods: Vec<PaddingMethod>,
    #[serde(default = "default_ansatz")]
    pub ansatz: AnsatzSet,
    #[serde(default)]
    pub sharing: bool,
    #[serde(default)]
    pub reps: Reps,
    #[serde(default)]
    pub training: TrainConfig,
    pub splits: SplitSizes,
    #[serde(default)]
    pub executor: ExecutorConfig,
    pub output_dir: PathBuf,
}

/// Reads a config, or the `config` section of a run manifest, and makes
/// every path absolute.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: invalid JSON: {e}", path.display())))?;
    if value.get("library_version").is_some() {
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
    }
    let mut config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let base = std::path::absolute(&base).unwrap_or(base);
    config.resolve_paths(&base);
    Ok(config)
}

fn absolute(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// `$QCNN_DATA_DIR`, else `./data`.
pub fn data_root() -> PathBuf {
    let root = std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("data"), PathBuf::from);
    std::path::absolute(&root).unwrap_or(root)
}

impl ExperimentConfig {
    fn resolve_paths(&mut self, base: &Path) {
        self.dataset.path = match (&self.dataset.path, self.dataset.kind) {
            (Some(p), _) => Some(absolute(base, p)),
            (None, DatasetKind::Mnist) => Some(data_root().join("mnist")),
            (None, DatasetKind::Wdbc) => Some(data_root().join("wdbc.data")),
            (None, DatasetKind::Table) => None,
        };
        if let ExecutorConfig::Noisy { profile: Some(p), .. } = &mut self.executor {
            *p = absolute(base, p);
        }
        self.output_dir = absolute(base, &self.output_dir);
    }

    /// Checks everything that does not need the dataset's contents.
    pub fn validate(&self) -> CliResult<()> {
        let [a, b] = self.labels;
        if a == b {
            return Err(CliError::config(format!("labels must differ, got {a} twice")));
        }
        if self.splits.train == 0 || self.splits.test == 0 {
            return Err(CliError::config("train and test splits must be nonempty"));
        }
        self.training
            .validate(self.splits.train)
            .map_err(|e| CliError::config(e.to_string()))?;
        if self.methods.is_empty() {
            return Err(CliError::config("methods list is empty"));
        }
        if let Reps::PerLayer(v) = &self.reps {
            if v.is_empty() || v.contains(&0) {
                return Err(CliError::config("reps must be positive"));
            }
        }
        if matches!(self.reps, Reps::Uniform(0)) {
            return Err(CliError::config("reps must be positive"));
        }
        match self.dataset.kind {
            DatasetKind::Mnist => {
                let c = self.features_hint().unwrap_or(0);
                if c < 4 || c > 784 {
                    return Err(CliError::config(format!("MNIST components must be in 4..=784, got {c}")));
                }
            }
            DatasetKind::Table if self.dataset.path.is_none() => {
                return Err(CliError::config("table datasets need an explicit path"));
            }
            _ if self.dataset.components.is_some() => {
                return Err(CliError::config("components only applies to MNIST"));
            }
            _ => {}
        }
        if let ExecutorConfig::Noisy { scales, .. } = &self.executor {
            check_scales(scales)?;
        }
        self.base_profile()?;
        Ok(())
    }

    /// Feature count after preprocessing, when known without reading data.
    pub fn features_hint(&self) -> Option<usize> {
        match self.dataset.kind {
            DatasetKind::Mnist => Some(self.dataset.components.unwrap_or(MNIST_DEFAULT_COMPONENTS)),
            DatasetKind::Wdbc => Some(30),
            DatasetKind::Table => None,
        }
    }

    /// Unscaled device profile, if the executor is noisy.
    pub fn base_profile(&self) -> CliResult<Option<DeviceNoiseProfile>> {
        match &self.executor {
            ExecutorConfig::Noiseless => Ok(None),
            ExecutorConfig::Noisy { profile: None, .. } => Ok(Some(DeviceNoiseProfile::ibmq_jakarta())),
            ExecutorConfig::Noisy { profile: Some(p), .. } => {
                if !p.is_file() {
                    return Err(CliError::config(format!("noise profile {} does not exist", p.display())));
                }
                Ok(Some(load_profile(p)?))
            }
        }
    }

    pub fn scaled_profile(&self, scale: f64) -> CliResult<Option<DeviceNoiseProfile>> {
        Ok(match self.base_profile()? {
            Some(p) => Some(scale_profile(&p, scale)?),
            None => None,
        })
    }

    pub fn architecture(&self, method: PaddingMethod, input_qubits: usize) -> CliResult<ArchitectureConfig> {
        let arch = ArchitectureConfig::new(input_qubits, method, self.reps.for_qubits(input_qubits), self.ansatz, self.sharing);
        arch.validate().map_err(|e| CliError::config(e.to_string()))?;
        Ok(arch)
    }
}

pub fn check_scales(scales: &[f64]) -> CliResult<()> {
    if scales.is_empty() {
        return Err(CliError::config("at least one noise scale is required"));
    }
    if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s >= 1.0)) {
        return Err(CliError::config(format!("noise scales must be finite and >= 1, got {s}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> CliResult<ExperimentConfig> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, json).unwrap();
        load_config(&path)
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse(r#"{"dataset":{"kind":"wdbc","path":"w.csv"},"labels":[1,0],"splits":{"train":10,"test":5},"output_dir":"out"}"#)
            .unwrap();
        assert_eq!(c.method, PaddingMethod::SingleAncilla);
        assert_eq!(c.ansatz, AnsatzSet::Two);
        assert_eq!(c.training, TrainConfig::default());
        assert!(c.output_dir.is_absolute() && c.dataset.path.unwrap().ends_with("w.csv"));
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(parse(r#"{"dataset":{"kind":"wdbc"},"labels":[1,0],"splits":{"train":10,"test":5},"output_dir":"o","oops":1}"#).is_err());
        assert!(parse(r#"{"dataset":{"kind":"wdbc"},"labels":[1,0],"method":"nope","splits":{"train":10,"test":5},"output_dir":"o"}"#).is_err());
        let c = parse(r#"{"dataset":{"kind":"wdbc"},"labels":[1,1],"splits":{"train":10,"test":5},"output_dir":"o"}"#).unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn manifest_config_section_is_accepted() {
        let c = parse(
            r#"{"library_version":"0.1.0","config":{"dataset":{"kind":"mnist","components":16},"labels":[0,1],"splits":{"train":10,"test":5},"output_dir":"/tmp/x"}}"#,
        )
        .unwrap();
        assert_eq!(c.features_hint(), Some(16));
        assert_eq!(c.output_dir, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn scales_must_be_at_least_one() {
        assert!(check_scales(&[1.0, 3.0]).is_ok());
        assert!(check_scales(&[0.5]).is_err());
        assert!(check_scales(&[]).is_err());
    }
}
