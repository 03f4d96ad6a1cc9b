use std::fs::File;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::{DataSource, RawDataset, RawSample};
use crate::error::{QcnnError, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

fn format_err(path: &Path, location: impl Into<String>, message: impl Into<String>) -> QcnnError {
    QcnnError::Format {
        path: path.display().to_string(),
        location: location.into(),
        message: message.into(),
    }
}

/// Reads a file, transparently inflating it when it starts with the gzip
/// magic bytes.
fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| QcnnError::io(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| format_err(path, "byte 0", format!("gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(path, format!("byte {offset}"), "truncated header"))
}

/// Parses an IDX file, returning its dimensions and payload.
fn parse_idx<'a>(bytes: &'a [u8], path: &Path, magic: u32) -> Result<(Vec<usize>, &'a [u8])> {
    let found = be_u32(bytes, 0, path)?;
    if found != magic {
        return Err(format_err(path, "byte 0", format!("magic {found:#010x}, expected {magic:#010x}")));
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (0..ndims)
        .map(|i| be_u32(bytes, 4 + 4 * i, path).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let header = 4 + 4 * ndims;
    let expected: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() < expected {
        return Err(format_err(
            path,
            format!("byte {}", header + payload.len()),
            format!("truncated payload: header promises {expected} bytes, found {}", payload.len()),
        ));
    }
    Ok((dims, &payload[..expected]))
}

/// Loads an MNIST image/label pair (raw or gzip IDX). Pixels are scaled to
/// `[0, 1]`.
pub fn load_mnist(images: &Path, labels: &Path) -> Result<RawDataset> {
    let image_bytes = read_maybe_gzip(images)?;
    let label_bytes = read_maybe_gzip(labels)?;
    let (idims, pixels) = parse_idx(&image_bytes, images, IDX_IMAGES_MAGIC)?;
    let (ldims, label_data) = parse_idx(&label_bytes, labels, IDX_LABELS_MAGIC)?;
    if idims[0] != ldims[0] {
        return Err(format_err(
            labels,
            "byte 4",
            format!("{} labels for {} images in {}", ldims[0], idims[0], images.display()),
        ));
    }
    let per_image = idims[1] * idims[2];
    let samples = pixels
        .chunks_exact(per_image)
        .zip(label_data)
        .enumerate()
        .map(|(index, (px, &label))| RawSample {
            features: px.iter().map(|&p| f64::from(p) / 255.0).collect(),
            label: i64::from(label),
            index,
        })
        .collect();
    Ok(RawDataset {
        source: DataSource::Mnist,
        samples,
    })
}

/// Appends `other` to `base`, renumbering its sample indices to follow on.
pub fn concat_datasets(mut base: RawDataset, other: RawDataset) -> RawDataset {
    let offset = base.samples.len();
    base.samples.extend(other.samples.into_iter().map(|mut s| {
        s.index += offset;
        s
    }));
    base
}

fn first_field_is_numeric(record: &csv::StringRecord) -> bool {
    record.get(0).is_some_and(|f| f.trim().parse::<f64>().is_ok())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| QcnnError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(file))
}

/// Loads the Wisconsin diagnostic breast cancer table: id, diagnosis
/// (`M`/`B`), then 30 features. `M` maps to class 1 and `B` to class 0. A
/// header row is skipped when its first field is not numeric.
pub fn load_wdbc(path: &Path) -> Result<RawDataset> {
    let mut samples = Vec::new();
    for (row, record) in csv_reader(path)?.records().enumerate() {
        let record = record.map_err(|e| format_err(path, format!("row {}", row + 1), e.to_string()))?;
        if row == 0 && !first_field_is_numeric(&record) {
            continue;
        }
        let at = || format!("row {}", row + 1);
        if record.len() != 32 {
            return Err(format_err(path, at(), format!("expected 32 columns, found {}", record.len())));
        }
        let label = match &record[1] {
            "M" => 1,
            "B" => 0,
            other => return Err(format_err(path, at(), format!("diagnosis '{other}' is neither M nor B"))),
        };
        let features = (2..32)
            .map(|c| {
                record[c]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format_err(path, at(), format!("column {} is not a finite number: '{}'", c + 1, &record[c])))
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(RawSample {
            features,
            label,
            index: samples.len(),
        });
    }
    Ok(RawDataset {
        source: DataSource::Wdbc,
        samples,
    })
}

/// Loads a generic numeric CSV whose first column is an integer class label
/// and whose remaining columns are features. A header row is skipped when
/// its first field is not numeric.
pub fn load_table(path: &Path) -> Result<RawDataset> {
    let mut samples: Vec<RawSample> = Vec::new();
    for (row, record) in csv_reader(path)?.records().enumerate() {
        let record = record.map_err(|e| format_err(path, format!("row {}", row + 1), e.to_string()))?;
        if row == 0 && !first_field_is_numeric(&record) {
            continue;
        }
        let at = || format!("row {}", row + 1);
        let label = record[0]
            .parse::<i64>()
            .map_err(|_| format_err(path, at(), format!("label '{}' is not an integer", &record[0])))?;
        let features = record
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| format_err(path, at(), "non-numeric feature"))?;
        if let Some(first) = samples.first() {
            if first.features.len() != features.len() {
                return Err(format_err(path, at(), format!("expected {} features, found {}", first.features.len(), features.len())));
            }
        }
        if features.is_empty() {
            return Err(format_err(path, at(), "no feature columns"));
        }
        samples.push(RawSample {
            features,
            label,
            index: samples.len(),
        });
    }
    Ok(RawDataset {
        source: DataSource::Table,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn idx_images(n: usize, rows: usize, cols: usize, fill: impl Fn(usize) -> u8) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IDX_IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
            b.extend(v.to_be_bytes());
        }
        b.extend((0..n * rows * cols).map(fill));
        b
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IDX_LABELS_MAGIC, labels.len() as u32] {
            b.extend(v.to_be_bytes());
        }
        b.extend(labels);
        b
    }

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn idx_round_trip_with_labels_and_scaling() {
        let dir = tempfile::tempdir().unwrap();
        // image i has every pixel equal to 25 * i, except image 0 which is blank
        let imgs = write(dir.path(), "img", &idx_images(10, 2, 3, |k| (k / 6 * 25) as u8));
        let labels: Vec<u8> = (0..10).map(|i| (7 * i % 10) as u8).collect();
        let lbls = write(dir.path(), "lbl", &idx_labels(&labels));
        let ds = load_mnist(&imgs, &lbls).unwrap();
        assert_eq!(ds.samples.len(), 10);
        assert_eq!(ds.samples[0].label, 0);
        assert!(ds.samples[0].features.iter().all(|&x| x == 0.0));
        assert_eq!(ds.samples[3].label, 1);
        assert_eq!(ds.samples[3].features, vec![75.0 / 255.0; 6]);
        assert!(ds.samples.iter().all(|s| s.features.len() == 6));
    }

    #[test]
    fn gzip_idx_is_inflated() {
        let dir = tempfile::tempdir().unwrap();
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::fast());
        enc.write_all(&idx_images(2, 2, 2, |k| k as u8)).unwrap();
        let imgs = write(dir.path(), "img.gz", &enc.finish().unwrap());
        let lbls = write(dir.path(), "lbl", &idx_labels(&[4, 2]));
        let ds = load_mnist(&imgs, &lbls).unwrap();
        assert_eq!(ds.samples[1].features[3], 7.0 / 255.0);
    }

    #[test]
    fn bad_magic_and_truncation_report_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let lbls = write(dir.path(), "lbl", &idx_labels(&[1, 2]));
        let mut bad = idx_images(2, 2, 2, |_| 0);
        bad[3] = 0x09;
        let imgs = write(dir.path(), "bad", &bad);
        let err = load_mnist(&imgs, &lbls).unwrap_err();
        assert!(matches!(&err, QcnnError::Format { location, .. } if location == "byte 0"), "{err}");

        let mut short = idx_images(2, 2, 2, |_| 0);
        short.truncate(short.len() - 3);
        let imgs = write(dir.path(), "short", &short);
        let err = load_mnist(&imgs, &lbls).unwrap_err();
        assert!(matches!(&err, QcnnError::Format { location, .. } if location == "byte 21"), "{err}");

        let imgs = write(dir.path(), "three", &idx_images(3, 2, 2, |_| 0));
        assert!(load_mnist(&imgs, &lbls).is_err());
    }

    fn wdbc_row(id: usize, diag: &str, first: f64) -> String {
        let mut cols = vec![id.to_string(), diag.to_string(), first.to_string()];
        cols.extend((1..30).map(|j| format!("{}.5", j)));
        cols.join(",")
    }

    #[test]
    fn wdbc_fixture_parses_classes_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let text = [wdbc_row(842302, "M", 17.99), wdbc_row(2, "B", 13.0), wdbc_row(3, "B", 9.5)].join("\n");
        let p = write(dir.path(), "wdbc.data", text.as_bytes());
        let ds = load_wdbc(&p).unwrap();
        assert_eq!(ds.samples.iter().map(|s| s.label).collect::<Vec<_>>(), vec![1, 0, 0]);
        assert_eq!(ds.samples[0].features[0], 17.99);
        assert_eq!(ds.samples[2].features[29], 29.5);
        assert_eq!(ds.samples[0].features.len(), 30);
    }

    #[test]
    fn wdbc_errors_name_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let header = format!("id,diagnosis,{}", (0..30).map(|i| format!("f{i}")).collect::<Vec<_>>().join(","));
        let mut bad = wdbc_row(2, "B", 1.0);
        bad = bad.replacen("1.5", "oops", 1);
        let text = [header, wdbc_row(1, "M", 2.0), bad].join("\n");
        let p = write(dir.path(), "wdbc.csv", text.as_bytes());
        let err = load_wdbc(&p).unwrap_err();
        assert!(matches!(&err, QcnnError::Format { location, .. } if location == "row 3"), "{err}");

        let p = write(dir.path(), "short.csv", b"1,M,2.0,3.0");
        assert!(load_wdbc(&p).unwrap_err().to_string().contains("32 columns"));
    }

    #[test]
    fn table_loader_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.csv", b"label,x,y\n0,0.5,1.0\n1,-0.5,2.0\n");
        let ds = load_table(&p).unwrap();
        assert_eq!(ds.samples.len(), 2);
        assert_eq!(ds.samples[1].label, 1);
        assert_eq!(ds.samples[1].features, vec![-0.5, 2.0]);
    }
}
