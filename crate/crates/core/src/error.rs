//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // rng
    #[error("empty choice set")]
    EmptyChoiceSet,

    // nn
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("label {label} out of range for {class_count} classes (row {row})")]
    LabelOutOfRange {
        label: usize,
        class_count: usize,
        row: usize,
    },
    #[error("empty batch")]
    EmptyBatch,

    // anneal
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("worsening must be finite, got {0}")]
    NonFiniteWorsening(f64),
    #[error("cooling factor must lie in (0,1), got {0}")]
    InvalidCoolingFactor(f64),

    // optim
    #[error("invalid learning-rate set: {0}")]
    InvalidLearningRateSet(String),
    #[error("epoch {epoch} is beyond the schedule (total span {span})")]
    EpochBeyondSchedule { epoch: usize, span: usize },
    #[error("invalid step size: {0}")]
    InvalidStepSize(f64),

    // data
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("wrong magic in {path}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("truncated file {path}: expected {expected} bytes of payload, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        source: csv::Error,
    },
    #[error("missing label column {column:?} in {path}")]
    MissingLabelColumn { path: PathBuf, column: String },
    #[error("non-numeric feature at row {row}, column {column:?}: {value:?}")]
    BadFeatureValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("non-finite feature at row {row}, column {column:?}")]
    NonFiniteFeature { row: usize, column: String },
    #[error("no samples in dataset")]
    NoSamples,
    #[error("split fraction {fraction} leaves an empty {side} part for {n} samples")]
    BadSplit {
        fraction: f64,
        n: usize,
        side: &'static str,
    },

    // harness / cli
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("empty seed list")]
    EmptySeedList,
    #[error("training failed at epoch {epoch}, batch {batch}: {source}")]
    Training {
        epoch: usize,
        batch: usize,
        source: Box<Error>,
    },
    #[error("bad checkpoint file {path}: {reason}")]
    BadCheckpoint { path: PathBuf, reason: String },
}

impl Error {
    /// Attach (epoch, batch) context to an error bubbling out of the training loop.
    pub fn in_training(self, epoch: usize, batch: usize) -> Error {
        Error::Training {
            epoch,
            batch,
            source: Box::new(self),
        }
    }
}
