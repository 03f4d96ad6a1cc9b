//! Loader checks against the real files, when they are present.

use std::path::PathBuf;

use qcnn::datapipe::{concat_datasets, load_mnist, load_wdbc};

fn data_dir() -> PathBuf {
    std::env::var_os("QCNN_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

#[test]
fn mnist_pool_has_seventy_thousand_images() {
    let dir = data_dir().join("mnist");
    let file = |name: &str| {
        let plain = dir.join(name);
        if plain.exists() {
            plain
        } else {
            dir.join(format!("{name}.gz"))
        }
    };
    if !file("train-images-idx3-ubyte").exists() {
        eprintln!("MNIST not found under {}, skipping", dir.display());
        return;
    }
    let train = load_mnist(&file("train-images-idx3-ubyte"), &file("train-labels-idx1-ubyte")).unwrap();
    let test = load_mnist(&file("t10k-images-idx3-ubyte"), &file("t10k-labels-idx1-ubyte")).unwrap();
    assert_eq!((train.samples.len(), test.samples.len()), (60_000, 10_000));
    let pool = concat_datasets(train, test);
    assert!(pool.samples.iter().all(|s| s.features.len() == 784 && (0..10).contains(&s.label)));
    assert!(pool.samples.iter().enumerate().all(|(i, s)| s.index == i));
    assert!(pool.samples[0].features.iter().all(|&x| (0.0..=255.0).contains(&x)));
}

#[test]
fn wdbc_has_569_rows_of_30_features() {
    let path = data_dir().join("wdbc.data");
    if !path.exists() {
        eprintln!("{} not found, skipping", path.display());
        return;
    }
    let ds = load_wdbc(&path).unwrap();
    assert_eq!(ds.samples.len(), 569);
    assert!(ds.samples.iter().all(|s| s.features.len() == 30));
    let malignant = ds.samples.iter().filter(|s| s.label == 1).count();
    assert_eq!(malignant, 212);
}
