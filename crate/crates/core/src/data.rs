//! Dataset ingestion (IDX and CSV), normalization, train/validation split,
//! and deterministic minibatch iteration.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngState;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Immutable labelled dataset: one feature row per sample, labels as dense
/// 0-based class indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    class_count: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                got: labels.len(),
                context: "one label per sample",
            });
        }
        if features.rows() == 0 {
            return Err(Error::NoSamples);
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::LabelOutOfRange {
                label,
                class_count,
                row,
            });
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature {
                row: pos / features.cols(),
                column: format!("{}", pos % features.cols()),
            });
        }
        Ok(Dataset {
            features,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// One block of a per-epoch shuffled training pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Minibatch {
    pub inputs: Matrix,
    pub targets: Vec<usize>,
    pub epoch_index: usize,
    pub batch_index: usize,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

fn read_be_u32(bytes: &[u8], pos: usize, path: &Path) -> Result<u32> {
    bytes
        .get(pos..pos + 4)
        .map(|s| u32::from_be_bytes(s.try_into().unwrap()))
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            expected: pos + 4,
            found: bytes.len(),
        })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(bytes)
}

/// Load an IDX image/label pair (the MNIST-family distribution format).
/// Pixel bytes map to reals in `[0,1]` by division by 255.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = read_file(images_path)?;
    let magic = read_be_u32(&images, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            path: images_path.to_path_buf(),
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let n = read_be_u32(&images, 4, images_path)? as usize;
    let rows = read_be_u32(&images, 8, images_path)? as usize;
    let cols = read_be_u32(&images, 12, images_path)? as usize;
    let n_features = rows * cols;
    let payload = &images[16..];
    if payload.len() < n * n_features {
        return Err(Error::Truncated {
            path: images_path.to_path_buf(),
            expected: n * n_features,
            found: payload.len(),
        });
    }

    let labels_bytes = read_file(labels_path)?;
    let magic = read_be_u32(&labels_bytes, 0, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            path: labels_path.to_path_buf(),
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let n_labels = read_be_u32(&labels_bytes, 4, labels_path)? as usize;
    if n_labels != n {
        return Err(Error::CountMismatch {
            images: n,
            labels: n_labels,
        });
    }
    let label_payload = &labels_bytes[8..];
    if label_payload.len() < n {
        return Err(Error::Truncated {
            path: labels_path.to_path_buf(),
            expected: n,
            found: label_payload.len(),
        });
    }

    let features: Vec<f64> = payload[..n * n_features]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    let labels: Vec<usize> = label_payload[..n].iter().map(|&b| b as usize).collect();
    let class_count = labels.iter().max().map_or(0, |&m| m + 1);
    Dataset::new(Matrix::from_vec(n, n_features, features)?, labels, class_count)
}

/// Load a CSV file with a header row. `label_column` names the label; every
/// other column is a numeric feature (kept in column order). Labels map to
/// dense 0-based indices by first appearance; the mapping is returned
/// alongside the dataset.
pub fn load_csv(path: &Path, label_column: &str) -> Result<(Dataset, Vec<String>)> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_err)?;

    let headers = reader.headers().map_err(csv_err)?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn {
            path: path.to_path_buf(),
            column: label_column.to_string(),
        })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut features: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut class_names: Vec<String> = Vec::new();

    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = row_idx + 1; // 1-based data row for diagnostics
        let mut f = 0usize;
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                let label = match class_names.iter().position(|c| c == cell) {
                    Some(k) => k,
                    None => {
                        class_names.push(cell.to_string());
                        class_names.len() - 1
                    }
                };
                labels.push(label);
            } else {
                let column = feature_names
                    .get(f)
                    .cloned()
                    .unwrap_or_else(|| format!("{i}"));
                let v: f64 = cell.trim().parse().map_err(|_| Error::BadFeatureValue {
                    row,
                    column: column.clone(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFiniteFeature { row, column });
                }
                features.push(v);
                f += 1;
            }
        }
    }

    if labels.is_empty() {
        return Err(Error::NoSamples);
    }
    let n = labels.len();
    let dataset = Dataset::new(
        Matrix::from_vec(n, feature_names.len(), features)?,
        labels,
        class_names.len(),
    )?;
    Ok((dataset, class_names))
}

/// Split into disjoint (train, validation) parts. Validation gets
/// `floor(n * val_fraction)` samples (at least 1); the order comes from one
/// shuffle of the sample indices.
pub fn split(d: &Dataset, val_fraction: f64, rng: &mut RngState) -> Result<(Dataset, Dataset)> {
    let n = d.len();
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::BadSplit {
            fraction: val_fraction,
            n,
            side: "validation",
        });
    }
    let n_val = ((n as f64 * val_fraction).floor() as usize).max(1);
    if n_val >= n {
        return Err(Error::BadSplit {
            fraction: val_fraction,
            n,
            side: "training",
        });
    }
    let perm = rng.shuffle(n);
    let (train_idx, val_idx) = perm.split_at(n - n_val);
    let take = |idx: &[usize]| -> Result<Dataset> {
        Dataset::new(
            d.features().select_rows(idx),
            idx.iter().map(|&i| d.labels()[i]).collect(),
            d.class_count(),
        )
    };
    Ok((take(train_idx)?, take(val_idx)?))
}

/// Minibatches for one epoch: a fresh shuffle keyed by `(shuffle stream,
/// epoch)`, chopped into `ceil(n / batch_size)` blocks with the final block
/// possibly short. Every sample appears exactly once.
///
/// `shuffle_root` is the run's shuffle substream; it is not advanced, so the
/// batch order for an epoch depends only on (seed, epoch).
pub fn minibatches(
    train: &Dataset,
    batch_size: usize,
    epoch: usize,
    shuffle_root: &RngState,
) -> Vec<Minibatch> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut rng = shuffle_root.keyed(epoch as u64);
    let perm = rng.shuffle(train.len());
    perm.chunks(batch_size)
        .enumerate()
        .map(|(batch_index, idx)| Minibatch {
            inputs: train.features().select_rows(idx),
            targets: idx.iter().map(|&i| train.labels()[i]).collect(),
            epoch_index: epoch,
            batch_index,
        })
        .collect()
}

/// Per-feature affine normalization fitted on the training split only.
#[derive(Clone, Debug)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    /// Fit mean and standard deviation per feature. Constant features get
    /// std 1 so they map to 0 instead of dividing by zero.
    pub fn fit(train: &Dataset) -> Standardizer {
        let n = train.len() as f64;
        let dim = train.feature_dim();
        let mut mean = vec![0.0; dim];
        for s in 0..train.len() {
            for (j, &v) in train.features().row(s).iter().enumerate() {
                mean[j] += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for s in 0..train.len() {
            for (j, &v) in train.features().row(s).iter().enumerate() {
                var[j] += (v - mean[j]) * (v - mean[j]);
            }
        }
        let std = var
            .iter()
            .map(|&v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        if d.feature_dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: d.feature_dim(),
                context: "standardizer feature dimension",
            });
        }
        let mut features = d.features().clone();
        for s in 0..features.rows() {
            for (j, v) in features.row_mut(s).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        Dataset::new(features, d.labels().to_vec(), d.class_count())
    }
}
