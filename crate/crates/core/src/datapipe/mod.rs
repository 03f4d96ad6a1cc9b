//! Dataset loading, preprocessing, splitting and amplitude encoding.

mod kde;
mod loaders;
mod pca;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::architect::PaddingMethod;
use crate::error::{QcnnError, Result};
use crate::simcore::PureState;

pub use kde::{kde_transform, kde_transform_fit, KdeModel, KDE_BANDWIDTH_RULE, KDE_EPS};
pub use loaders::{concat_datasets, load_mnist, load_table, load_wdbc};
pub use pca::{pca_fit, pca_transform, PcaModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Mnist,
    Wdbc,
    /// Generic CSV: integer label, then features.
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub features: Vec<f64>,
    /// Class id as stored in the source (digit, or 1 = malignant / 0 = benign).
    pub label: i64,
    /// Position in the source file(s).
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub source: DataSource,
    pub samples: Vec<RawSample>,
}

/// How a feature vector is stretched to `2^target_qubits` amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PadMode {
    /// Zero-fill to the next power of two only; the target must be exactly
    /// `ceil(log2 N)` qubits.
    None,
    /// Zero-fill to the target size.
    Zero,
    /// Repeat the features cyclically, truncating the last repetition.
    Periodic,
}

impl fmt::Display for PadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PadMode::None => "none",
            PadMode::Zero => "zero",
            PadMode::Periodic => "periodic",
        })
    }
}

impl FromStr for PadMode {
    type Err = QcnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PadMode::None),
            "zero" => Ok(PadMode::Zero),
            "periodic" => Ok(PadMode::Periodic),
            other => Err(QcnnError::arg(format!("unknown pad mode '{other}'"))),
        }
    }
}

/// `ceil(log2 n)` for `n >= 1`.
pub fn qubits_for(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()) as usize
}

/// Pad mode and register size a padding method needs for `num_features`
/// inputs. Classical padding fills `2^m` qubits, `m = ceil(log2 K)`.
pub fn encoding_for(method: PaddingMethod, num_features: usize) -> (PadMode, usize) {
    let k = qubits_for(num_features);
    match method {
        PaddingMethod::ZeroData => (PadMode::Zero, 1 << qubits_for(k)),
        PaddingMethod::PeriodicData => (PadMode::Periodic, 1 << qubits_for(k)),
        _ => (PadMode::None, k),
    }
}

/// Normalised amplitude vector of `features` on `target_qubits` qubits.
pub fn amplitude_encode(features: &[f64], pad: PadMode, target_qubits: usize) -> Result<PureState> {
    let n = features.len();
    if n == 0 || target_qubits == 0 || target_qubits >= usize::BITS as usize {
        return Err(QcnnError::arg("need at least one feature and one qubit"));
    }
    let dim = 1usize << target_qubits;
    if n > dim {
        return Err(QcnnError::arg(format!("{n} features do not fit in {target_qubits} qubits")));
    }
    if pad == PadMode::None && qubits_for(n) != target_qubits {
        return Err(QcnnError::arg(format!(
            "{n} features need exactly {} qubits without padding, not {target_qubits}",
            qubits_for(n)
        )));
    }
    let raw: Vec<f64> = match pad {
        PadMode::None | PadMode::Zero => features.iter().copied().chain(std::iter::repeat(0.0)).take(dim).collect(),
        PadMode::Periodic => features.iter().copied().cycle().take(dim).collect(),
    };
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(QcnnError::arg("feature vector cannot be normalised (all zero or non-finite)"));
    }
    PureState::from_amplitudes(raw.iter().map(|x| Complex64::new(x / norm, 0.0)).collect())
}

/// Feature preprocessing, fitted on the training split only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Preprocess {
    None,
    Pca { components: usize },
    Kde,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedPreprocess {
    None,
    Pca(PcaModel),
    Kde(KdeModel),
}

impl FittedPreprocess {
    pub fn fit(kind: Preprocess, train: &[Vec<f64>]) -> Result<Self> {
        Ok(match kind {
            Preprocess::None => FittedPreprocess::None,
            Preprocess::Pca { components } => FittedPreprocess::Pca(pca_fit(train, components)?),
            Preprocess::Kde => FittedPreprocess::Kde(kde_transform_fit(train)),
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FittedPreprocess::None => x.to_vec(),
            FittedPreprocess::Pca(m) => m.transform(x),
            FittedPreprocess::Kde(m) => m.transform(x),
        }
    }

    /// Feature count after preprocessing `input_dim` raw features.
    pub fn output_dim(kind: Preprocess, input_dim: usize) -> usize {
        match kind {
            Preprocess::Pca { components } => components,
            _ => input_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub seed: u64,
    /// Source classes kept; the first maps to +1 and the second to -1.
    pub labels: [i64; 2],
    pub preprocess: Preprocess,
    pub pad_mode: PadMode,
    pub target_qubits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub state: PureState,
    /// +1 or -1.
    pub label: f64,
    pub raw_index: usize,
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Vec<EncodedSample>,
    pub validation: Vec<EncodedSample>,
    pub test: Vec<EncodedSample>,
    pub preprocess: FittedPreprocess,
}

/// Shuffles the two requested classes with `spec.seed`, takes disjoint
/// train/validation/test slices, fits preprocessing on the train slice and
/// encodes everything.
pub fn make_splits(dataset: &RawDataset, spec: &SplitSpec) -> Result<Splits> {
    if spec.labels[0] == spec.labels[1] {
        return Err(QcnnError::arg("the two labels must differ"));
    }
    if spec.train == 0 {
        return Err(QcnnError::arg("training split is empty"));
    }
    let mut pool: Vec<&RawSample> = dataset.samples.iter().filter(|s| spec.labels.contains(&s.label)).collect();
    let needed = spec.train + spec.validation + spec.test;
    if pool.len() < needed {
        return Err(QcnnError::arg(format!(
            "labels {:?} have {} samples but the splits need {needed} (short by {})",
            spec.labels,
            pool.len(),
            needed - pool.len()
        )));
    }
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (train_raw, rest) = pool.split_at(spec.train);
    let (val_raw, rest) = rest.split_at(spec.validation);
    let test_raw = &rest[..spec.test];

    let train_features: Vec<Vec<f64>> = train_raw.iter().map(|s| s.features.clone()).collect();
    let preprocess = FittedPreprocess::fit(spec.preprocess, &train_features)?;
    let encode = |samples: &[&RawSample]| -> Result<Vec<EncodedSample>> {
        samples
            .iter()
            .map(|s| {
                let x = preprocess.apply(&s.features);
                let state = amplitude_encode(&x, spec.pad_mode, spec.target_qubits)
                    .map_err(|e| QcnnError::arg(format!("sample {}: {e}", s.index)))?;
                Ok(EncodedSample {
                    state,
                    label: if s.label == spec.labels[0] { 1.0 } else { -1.0 },
                    raw_index: s.index,
                })
            })
            .collect()
    };
    Ok(Splits {
        train: encode(train_raw)?,
        validation: encode(val_raw)?,
        test: encode(test_raw)?,
        preprocess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn amps(s: &PureState) -> Vec<f64> {
        s.amplitudes().iter().map(|a| a.re).collect()
    }

    #[test]
    fn thirty_features_zero_padded_to_eight_qubits() {
        let x: Vec<f64> = (1..=30).map(f64::from).collect();
        let s = amplitude_encode(&x, PadMode::Zero, 8).unwrap();
        let a = amps(&s);
        assert_eq!(a.len(), 256);
        assert!(a[30..].iter().all(|&v| v == 0.0));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn basis_vector_without_padding() {
        let s = amplitude_encode(&[1.0, 0.0, 0.0, 0.0], PadMode::None, 2).unwrap();
        assert_eq!(amps(&s), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn periodic_tiling_truncates() {
        let (a, b, c) = (0.3, -1.2, 2.0);
        let s = amplitude_encode(&[a, b, c], PadMode::Periodic, 2).unwrap();
        let norm = (a * a + b * b + c * c + a * a).sqrt();
        let want = [a / norm, b / norm, c / norm, a / norm];
        for (x, y) in amps(&s).iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn encoding_errors() {
        assert!(amplitude_encode(&[0.0, 0.0], PadMode::Zero, 1).is_err());
        assert!(amplitude_encode(&[1.0; 5], PadMode::Zero, 2).is_err());
        assert!(amplitude_encode(&[1.0; 3], PadMode::None, 3).is_err());
    }

    #[test]
    fn method_encodings_for_thirty_features() {
        assert_eq!(encoding_for(PaddingMethod::ZeroData, 30), (PadMode::Zero, 8));
        assert_eq!(encoding_for(PaddingMethod::PeriodicData, 30), (PadMode::Periodic, 8));
        assert_eq!(encoding_for(PaddingMethod::SingleAncilla, 30), (PadMode::None, 5));
        assert_eq!(encoding_for(PaddingMethod::SkipPooling, 4), (PadMode::None, 2));
        assert_eq!(encoding_for(PaddingMethod::ZeroData, 4), (PadMode::Zero, 2));
    }

    fn toy_dataset(n: usize) -> RawDataset {
        RawDataset {
            source: DataSource::Table,
            samples: (0..n)
                .map(|i| RawSample {
                    features: vec![1.0 + i as f64, (i % 7) as f64],
                    label: (i % 3) as i64,
                    index: i,
                })
                .collect(),
        }
    }

    fn spec(seed: u64) -> SplitSpec {
        SplitSpec {
            train: 20,
            validation: 5,
            test: 6,
            seed,
            labels: [2, 0],
            preprocess: Preprocess::None,
            pad_mode: PadMode::None,
            target_qubits: 1,
        }
    }

    #[test]
    fn splits_are_deterministic_disjoint_and_labelled() {
        let ds = toy_dataset(60);
        let a = make_splits(&ds, &spec(9)).unwrap();
        let b = make_splits(&ds, &spec(9)).unwrap();
        let idx = |s: &Splits| -> Vec<usize> { s.train.iter().chain(&s.validation).chain(&s.test).map(|e| e.raw_index).collect() };
        assert_eq!(idx(&a), idx(&b));
        let mut all = idx(&a);
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 31);
        for e in a.train.iter().chain(&a.test) {
            let want = if ds.samples[e.raw_index].label == 2 { 1.0 } else { -1.0 };
            assert_eq!(e.label, want);
        }
        assert_ne!(idx(&a), idx(&make_splits(&ds, &spec(10)).unwrap()));
    }

    #[test]
    fn shortfall_is_reported() {
        let err = make_splits(&toy_dataset(30), &spec(1)).unwrap_err();
        assert!(err.to_string().contains("short by 11"), "{err}");
    }

    proptest! {
        #[test]
        fn encoded_states_have_unit_norm(x in prop::collection::vec(-10.0f64..10.0, 2..40), pad in 0usize..3) {
            prop_assume!(x.iter().any(|v| v.abs() > 1e-6));
            let mode = [PadMode::None, PadMode::Zero, PadMode::Periodic][pad];
            let q = qubits_for(x.len()) + usize::from(mode != PadMode::None);
            let s = amplitude_encode(&x, mode, q).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn pad_modes_coincide_at_powers_of_two(n in 0usize..6, seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..1usize << n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = n;
            prop_assume!(q >= 1);
            let a = amplitude_encode(&x, PadMode::None, q).unwrap();
            prop_assert_eq!(&a, &amplitude_encode(&x, PadMode::Zero, q).unwrap());
            prop_assert_eq!(&a, &amplitude_encode(&x, PadMode::Periodic, q).unwrap());
        }

        #[test]
        fn zero_padding_preserves_ratios(x in prop::collection::vec(0.1f64..5.0, 2..20), extra in 1usize..3) {
            let q = qubits_for(x.len()) + extra;
            let s = amps(&amplitude_encode(&x, PadMode::Zero, q).unwrap());
            for i in 1..x.len() {
                prop_assert!((s[i] / s[0] - x[i] / x[0]).abs() < 1e-12 * (x[i] / x[0]).max(1.0));
            }
        }
    }
}
