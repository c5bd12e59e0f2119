//! The training loop: epochs of minibatch steps with per-epoch cooling and
//! validation, best-on-validation checkpointing, per-epoch metrics, and the
//! multi-seed experiment protocol.

use std::path::Path;

use crate::anneal::CoolingState;
use crate::data::{minibatches, Dataset};
use crate::error::{Error, Result};
use crate::nn::{self, Activation, NetworkSpec, ParameterVector};
use crate::optim::{self, BatchObjective, GradientObjective, LearningRateSet, StepOutcome};
use crate::rng::{Purpose, RngState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    SgdSa,
    Ssa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoolingInterval {
    Epoch,
    Iteration,
}

/// Everything that determines a run besides the datasets. Fields that do not
/// apply to the selected optimizer are carried but ignored.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainingConfig {
    pub optimizer: OptimizerKind,
    /// Hidden layer widths; input and class dimensions come from the data.
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub t0: f64,
    pub alpha: f64,
    pub lr_set: LearningRateSet,
    /// `(epoch span, rate)` pairs for the scheduled-SGD baseline.
    pub schedule: Vec<(usize, f64)>,
    pub epsilon: f64,
    pub val_fraction: f64,
    pub cooling_per: CoolingInterval,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            optimizer: OptimizerKind::SgdSa,
            hidden_layers: vec![32, 16],
            activation: Activation::Relu,
            epochs: 100,
            batch_size: 512,
            seed: 1,
            t0: 1.0,
            alpha: 0.8,
            lr_set: LearningRateSet::default(),
            schedule: vec![(30, 0.1), (40, 0.01), (30, 0.001)],
            epsilon: 0.01,
            val_fraction: 0.2,
            cooling_per: CoolingInterval::Epoch,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !self.t0.is_finite() || self.t0 <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "t0 must be positive, got {}",
                self.t0
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "val fraction must lie in (0,1), got {}",
                self.val_fraction
            )));
        }
        if self.optimizer == OptimizerKind::Ssa && (!self.epsilon.is_finite() || self.epsilon <= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.optimizer == OptimizerKind::Sgd {
            let span: usize = self.schedule.iter().map(|&(s, _)| s).sum();
            if span < self.epochs {
                return Err(Error::InvalidConfig(format!(
                    "schedule covers {span} epochs but the run has {}",
                    self.epochs
                )));
            }
            if self.schedule.iter().any(|&(_, r)| !r.is_finite() || r <= 0.0) {
                return Err(Error::InvalidConfig("schedule rates must be positive".into()));
            }
        }
        Ok(())
    }

    /// Stable hex digest of the resolved config, used to tag checkpoints and
    /// output directories.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        // FNV-1a 64
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Per-epoch log row. Loss and accuracy over the training pass are
/// sample-weighted running means of the pre-step minibatch values; the
/// temperature is the value after the epoch's cooling; the histogram counts
/// how often each element of `H` was drawn (sgd-sa only, empty otherwise).
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub temperature: f64,
    pub mean_accept_prob_clipped: f64,
    pub improving_moves: u64,
    pub accepted_worsening_moves: u64,
    pub rejected_moves: u64,
    pub eta_histogram: Vec<u64>,
}

/// Best-on-validation weights with their provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub weights: ParameterVector,
    pub epoch: usize,
    pub val_accuracy: f64,
    pub config_digest: String,
}

/// Output of one run: the best checkpoint, one metrics record per epoch, and
/// the per-step accept/reject sequence (empty for plain SGD, where every
/// step is applied).
#[derive(Clone, Debug, PartialEq)]
pub struct TrainResult {
    pub best: Checkpoint,
    pub log: Vec<MetricsRecord>,
    pub accept_trace: Vec<bool>,
}

struct EpochAccumulator {
    loss_weighted: f64,
    correct: usize,
    samples: usize,
    prob_sum: f64,
    decisions: u64,
    improving: u64,
    accepted_worsening: u64,
    rejected: u64,
    eta_histogram: Vec<u64>,
}

impl EpochAccumulator {
    fn new(eta_bins: usize) -> Self {
        EpochAccumulator {
            loss_weighted: 0.0,
            correct: 0,
            samples: 0,
            prob_sum: 0.0,
            decisions: 0,
            improving: 0,
            accepted_worsening: 0,
            rejected: 0,
            eta_histogram: vec![0; eta_bins],
        }
    }

    fn record_batch(&mut self, loss: f64, correct: usize, batch_len: usize) {
        self.loss_weighted += loss * batch_len as f64;
        self.correct += correct;
        self.samples += batch_len;
    }

    fn record_outcome(&mut self, outcome: &StepOutcome) {
        self.prob_sum += outcome.decision.probability;
        self.decisions += 1;
        if outcome.decision.worsening <= 0.0 {
            self.improving += 1;
        } else if outcome.decision.accepted {
            self.accepted_worsening += 1;
        } else {
            self.rejected += 1;
        }
        if let Some(i) = outcome.eta_index {
            self.eta_histogram[i] += 1;
        }
    }
}

/// Mean loss and accuracy of `w` over a whole dataset, processed in blocks
/// of `batch_size` and weighted by sample so the result does not depend on
/// the block size.
pub fn evaluate(
    spec: &NetworkSpec,
    w: &ParameterVector,
    d: &Dataset,
    batch_size: usize,
) -> Result<(f64, f64)> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let n = d.len();
    let mut loss_weighted = 0.0;
    let mut correct = 0usize;
    let indices: Vec<usize> = (0..n).collect();
    for chunk in indices.chunks(batch_size) {
        let inputs = d.features().select_rows(chunk);
        let labels: Vec<usize> = chunk.iter().map(|&i| d.labels()[i]).collect();
        let logits = nn::forward(spec, w, &inputs)?;
        loss_weighted += nn::loss(&logits, &labels)? * chunk.len() as f64;
        correct += nn::correct_predictions(&logits, &labels)?;
    }
    Ok((loss_weighted / n as f64, correct as f64 / n as f64))
}

/// Run the full training loop and return the best-on-validation checkpoint
/// (ties broken toward the earlier epoch) plus the per-epoch log.
pub fn train(config: &TrainingConfig, train_set: &Dataset, val_set: &Dataset) -> Result<TrainResult> {
    config.validate()?;
    if train_set.feature_dim() != val_set.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: train_set.feature_dim(),
            got: val_set.feature_dim(),
            context: "validation feature dimension",
        });
    }
    if train_set.class_count() != val_set.class_count() {
        return Err(Error::InvalidConfig(format!(
            "train has {} classes but validation has {}",
            train_set.class_count(),
            val_set.class_count()
        )));
    }

    let mut layer_sizes = Vec::with_capacity(config.hidden_layers.len() + 2);
    layer_sizes.push(train_set.feature_dim());
    layer_sizes.extend_from_slice(&config.hidden_layers);
    layer_sizes.push(train_set.class_count());
    let spec = NetworkSpec::new(layer_sizes, config.activation)?;

    let master = RngState::new_master(config.seed);
    let mut rng_init = master.substream(Purpose::Init);
    let shuffle_root = master.substream(Purpose::Shuffle);
    let mut rng_lr = master.substream(Purpose::LrPick);
    let mut rng_accept = master.substream(Purpose::Accept);
    let mut rng_direction = master.substream(Purpose::SsaDirection);

    let mut w = nn::init_weights(&spec, &mut rng_init);
    let mut cooling = CoolingState::new(config.t0, config.alpha)?;
    let digest = config.digest();

    let mut log: Vec<MetricsRecord> = Vec::with_capacity(config.epochs);
    let mut accept_trace: Vec<bool> = Vec::new();
    let mut best: Option<Checkpoint> = None;

    let eta_bins = if config.optimizer == OptimizerKind::SgdSa {
        config.lr_set.len()
    } else {
        0
    };

    for epoch in 1..=config.epochs {
        let mut acc = EpochAccumulator::new(eta_bins);
        for batch in minibatches(train_set, config.batch_size, epoch, &shuffle_root) {
            let batch_index = batch.batch_index;
            let ctx = |e: Error| e.in_training(epoch, batch_index);
            let objective = BatchObjective {
                spec: &spec,
                batch: &batch,
            };

            // pre-step metrics on this minibatch
            let logits = nn::forward(&spec, &w, &batch.inputs).map_err(ctx)?;
            let correct = nn::correct_predictions(&logits, &batch.targets).map_err(ctx)?;

            match config.optimizer {
                OptimizerKind::Sgd => {
                    let eta = optim::scheduled_lr(epoch, &config.schedule).map_err(ctx)?;
                    let (loss_before, grad) = objective.loss_and_gradient(&w).map_err(ctx)?;
                    w = optim::sgd_step(&w, &grad, eta).map_err(ctx)?;
                    acc.record_batch(loss_before, correct, batch.len());
                }
                OptimizerKind::SgdSa => {
                    let (next, outcome) = optim::sgdsa_step(
                        &objective,
                        w,
                        &config.lr_set,
                        &cooling,
                        &mut rng_lr,
                        &mut rng_accept,
                    )
                    .map_err(ctx)?;
                    w = next;
                    acc.record_batch(outcome.loss_before, correct, batch.len());
                    acc.record_outcome(&outcome);
                    accept_trace.push(outcome.decision.accepted);
                }
                OptimizerKind::Ssa => {
                    let (next, outcome) = optim::ssa_step(
                        &objective,
                        w,
                        config.epsilon,
                        &cooling,
                        &mut rng_direction,
                        &mut rng_accept,
                    )
                    .map_err(ctx)?;
                    w = next;
                    acc.record_batch(outcome.loss_before, correct, batch.len());
                    acc.record_outcome(&outcome);
                    accept_trace.push(outcome.decision.accepted);
                }
            }

            if config.cooling_per == CoolingInterval::Iteration {
                cooling = cooling.cool();
            }
        }

        if config.cooling_per == CoolingInterval::Epoch {
            cooling = cooling.cool();
        }

        let n_batches = train_set.len().div_ceil(config.batch_size);
        let (val_loss, val_accuracy) = evaluate(&spec, &w, val_set, config.batch_size)
            .map_err(|e| e.in_training(epoch, n_batches))?;

        // plain SGD applies every step: report certainty, not a measured mean
        let mean_accept_prob = if acc.decisions > 0 {
            acc.prob_sum / acc.decisions as f64
        } else {
            1.0
        };

        log.push(MetricsRecord {
            epoch,
            train_loss: acc.loss_weighted / acc.samples as f64,
            train_accuracy: acc.correct as f64 / acc.samples as f64,
            val_loss,
            val_accuracy,
            temperature: cooling.temperature(),
            mean_accept_prob_clipped: mean_accept_prob,
            improving_moves: acc.improving,
            accepted_worsening_moves: acc.accepted_worsening,
            rejected_moves: acc.rejected,
            eta_histogram: acc.eta_histogram,
        });

        let better = match &best {
            None => true,
            Some(b) => val_accuracy > b.val_accuracy,
        };
        if better {
            best = Some(Checkpoint {
                spec: spec.clone(),
                weights: w.clone(),
                epoch,
                val_accuracy,
                config_digest: digest.clone(),
            });
        }
    }

    Ok(TrainResult {
        best: best.expect("at least one epoch"),
        log,
        accept_trace,
    })
}

/// One row of the per-seed summary table.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_val_loss: f64,
    pub final_val_accuracy: f64,
    pub best_val_accuracy: f64,
    pub best_epoch: usize,
}

/// Independent runs over a list of seeds; nothing is shared between runs.
pub fn multi_seed(
    config: &TrainingConfig,
    seeds: &[u64],
    train_set: &Dataset,
    val_set: &Dataset,
) -> Result<Vec<(u64, TrainResult)>> {
    if seeds.is_empty() {
        return Err(Error::EmptySeedList);
    }
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let run_config = TrainingConfig {
            seed,
            ..config.clone()
        };
        out.push((seed, train(&run_config, train_set, val_set)?));
    }
    Ok(out)
}

pub fn summarize(runs: &[(u64, TrainResult)]) -> Vec<SeedSummary> {
    runs.iter()
        .map(|(seed, r)| {
            let last = r.log.last().expect("non-empty log");
            SeedSummary {
                seed: *seed,
                final_val_loss: last.val_loss,
                final_val_accuracy: last.val_accuracy,
                best_val_accuracy: r.best.val_accuracy,
                best_epoch: r.best.epoch,
            }
        })
        .collect()
}

/// Write the per-epoch log with the fixed column order: epoch, train_loss,
/// train_acc, val_loss, val_acc, temperature, mean_accept_prob, n_improving,
/// n_accepted_worsening, n_rejected, then one `eta_<rate>` column per
/// element of `H` (sgd-sa runs only).
pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord], eta_rates: &[f64]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_io(path))?;

    let mut header: Vec<String> = [
        "epoch",
        "train_loss",
        "train_acc",
        "val_loss",
        "val_acc",
        "temperature",
        "mean_accept_prob",
        "n_improving",
        "n_accepted_worsening",
        "n_rejected",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for rate in eta_rates {
        header.push(format!("eta_{rate}"));
    }
    writer.write_record(&header).map_err(csv_io(path))?;

    for r in records {
        let mut row: Vec<String> = vec![
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.train_accuracy.to_string(),
            r.val_loss.to_string(),
            r.val_accuracy.to_string(),
            r.temperature.to_string(),
            r.mean_accept_prob_clipped.to_string(),
            r.improving_moves.to_string(),
            r.accepted_worsening_moves.to_string(),
            r.rejected_moves.to_string(),
        ];
        for c in &r.eta_histogram {
            row.push(c.to_string());
        }
        writer.write_record(&row).map_err(csv_io(path))?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write the per-seed summary table (seed, final val loss/accuracy, best
/// val accuracy, best epoch).
pub fn write_summary_csv(path: &Path, rows: &[SeedSummary]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_io(path))?;
    writer
        .write_record([
            "seed",
            "final_val_loss",
            "final_val_accuracy",
            "best_val_accuracy",
            "best_epoch",
        ])
        .map_err(csv_io(path))?;
    for r in rows {
        writer
            .write_record([
                r.seed.to_string(),
                r.final_val_loss.to_string(),
                r.final_val_accuracy.to_string(),
                r.best_val_accuracy.to_string(),
                r.best_epoch.to_string(),
            ])
            .map_err(csv_io(path))?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::InvalidConfig(format!("csv: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    /// Small separable two-class dataset: class = sign of the first feature.
    fn toy_data(n: usize, seed: u64) -> Dataset {
        let mut rng = RngState::new_master(seed).substream(Purpose::Init);
        let mut features = Vec::with_capacity(n * 4);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x0 = rng.standard_normal();
            features.push(x0);
            for _ in 0..3 {
                features.push(rng.standard_normal() * 0.1);
            }
            labels.push(usize::from(x0 > 0.0));
        }
        Dataset::new(Matrix::from_vec(n, 4, features).unwrap(), labels, 2).unwrap()
    }

    fn tiny_config(optimizer: OptimizerKind) -> TrainingConfig {
        TrainingConfig {
            optimizer,
            hidden_layers: vec![8],
            epochs: 5,
            batch_size: 16,
            seed: 3,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn single_epoch_run_logs_one_record() {
        let train_set = toy_data(40, 1);
        let val_set = toy_data(10, 2);
        let config = TrainingConfig {
            epochs: 1,
            ..tiny_config(OptimizerKind::SgdSa)
        };
        let result = train(&config, &train_set, &val_set).unwrap();
        assert_eq!(result.log.len(), 1);
        assert_eq!(result.best.epoch, 1);
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let train_set = toy_data(60, 4);
        let val_set = toy_data(20, 5);
        for optimizer in [OptimizerKind::Sgd, OptimizerKind::SgdSa, OptimizerKind::Ssa] {
            let config = tiny_config(optimizer);
            let a = train(&config, &train_set, &val_set).unwrap();
            let b = train(&config, &train_set, &val_set).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn frozen_temperature_never_raises_train_loss() {
        let train_set = toy_data(60, 6);
        let val_set = toy_data(20, 7);
        let config = TrainingConfig {
            t0: 1e-12,
            epochs: 10,
            ..tiny_config(OptimizerKind::SgdSa)
        };
        let result = train(&config, &train_set, &val_set).unwrap();
        let first = result.log.first().unwrap().train_loss;
        let last = result.log.last().unwrap().train_loss;
        assert!(last <= first, "loss rose from {first} to {last}");
    }

    #[test]
    fn move_counters_sum_to_batches_per_epoch() {
        let train_set = toy_data(50, 8);
        let val_set = toy_data(16, 9);
        let config = tiny_config(OptimizerKind::SgdSa);
        let result = train(&config, &train_set, &val_set).unwrap();
        let batches_per_epoch = 50usize.div_ceil(config.batch_size) as u64;
        for r in &result.log {
            assert_eq!(
                r.improving_moves + r.accepted_worsening_moves + r.rejected_moves,
                batches_per_epoch
            );
            assert!((0.0..=1.0).contains(&r.mean_accept_prob_clipped));
        }
    }

    #[test]
    fn temperature_column_tracks_cooling() {
        let train_set = toy_data(30, 10);
        let val_set = toy_data(10, 11);
        let config = tiny_config(OptimizerKind::SgdSa);
        let result = train(&config, &train_set, &val_set).unwrap();
        let mut expect = config.t0;
        for r in &result.log {
            expect *= config.alpha;
            assert_eq!(r.temperature, expect);
        }
    }

    #[test]
    fn per_iteration_cooling_advances_every_step() {
        let train_set = toy_data(32, 19);
        let val_set = toy_data(10, 20);
        let config = TrainingConfig {
            cooling_per: CoolingInterval::Iteration,
            epochs: 3,
            batch_size: 16, // 2 batches per epoch
            ..tiny_config(OptimizerKind::SgdSa)
        };
        let result = train(&config, &train_set, &val_set).unwrap();
        let mut expect = config.t0;
        for r in &result.log {
            expect *= config.alpha;
            expect *= config.alpha;
            assert_eq!(r.temperature, expect);
        }
    }

    #[test]
    fn plain_sgd_reports_no_decisions() {
        let train_set = toy_data(40, 21);
        let val_set = toy_data(10, 22);
        let result = train(&tiny_config(OptimizerKind::Sgd), &train_set, &val_set).unwrap();
        assert!(result.accept_trace.is_empty());
        for r in &result.log {
            assert_eq!(r.improving_moves + r.accepted_worsening_moves + r.rejected_moves, 0);
            assert_eq!(r.mean_accept_prob_clipped, 1.0);
            assert!(r.eta_histogram.is_empty());
        }
    }

    #[test]
    fn best_checkpoint_dominates_log() {
        let train_set = toy_data(60, 12);
        let val_set = toy_data(20, 13);
        let result = train(&tiny_config(OptimizerKind::SgdSa), &train_set, &val_set).unwrap();
        for r in &result.log {
            assert!(r.val_accuracy <= result.best.val_accuracy);
        }
        // tie-break: the earliest epoch achieving the best value wins
        let first_best = result
            .log
            .iter()
            .find(|r| r.val_accuracy == result.best.val_accuracy)
            .unwrap();
        assert_eq!(result.best.epoch, first_best.epoch);
    }

    #[test]
    fn evaluate_is_batch_size_invariant() {
        let d = toy_data(23, 14);
        let spec = NetworkSpec::new(vec![4, 6, 2], Activation::Relu).unwrap();
        let mut rng = RngState::new_master(15).substream(Purpose::Init);
        let w = nn::init_weights(&spec, &mut rng);
        let (l1, a1) = evaluate(&spec, &w, &d, 1).unwrap();
        let (ln, an) = evaluate(&spec, &w, &d, 23).unwrap();
        let (l7, a7) = evaluate(&spec, &w, &d, 7).unwrap();
        assert!((l1 - ln).abs() < 1e-10);
        assert!((l1 - l7).abs() < 1e-10);
        assert_eq!(a1, an);
        assert_eq!(a1, a7);
    }

    #[test]
    fn evaluate_zero_weights_gives_ln_k() {
        let d = toy_data(10, 16);
        let spec = NetworkSpec::new(vec![4, 5, 2], Activation::Relu).unwrap();
        let w = ParameterVector::zeros(spec.param_count());
        let (loss, _) = evaluate(&spec, &w, &d, 4).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn memorizing_weights_reach_full_accuracy() {
        // one-hot features, weights copy the input onto the logits
        let features = Matrix::from_vec(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let d = Dataset::new(features, vec![0, 1, 2], 3).unwrap();
        let spec = NetworkSpec::new(vec![3, 3], Activation::Relu).unwrap();
        let mut w = ParameterVector::zeros(spec.param_count());
        for layer in spec.layers() {
            for o in 0..layer.d_out {
                w.values[layer.weight_offset + o * layer.d_in + o] = 1.0;
            }
        }
        let (_, acc) = evaluate(&spec, &w, &d, 2).unwrap();
        assert_eq!(acc, 1.0);
    }

    /// Unlearnable dataset: labels independent of features, so the loss
    /// floor is ln 2 and worsening candidates show up quickly.
    fn noise_data(n: usize, seed: u64) -> Dataset {
        let mut rng = RngState::new_master(seed).substream(Purpose::Init);
        let mut features = Vec::with_capacity(n * 4);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            for _ in 0..4 {
                features.push(rng.standard_normal());
            }
            labels.push(rng.choice(2).unwrap());
        }
        Dataset::new(Matrix::from_vec(n, 4, features).unwrap(), labels, 2).unwrap()
    }

    #[test]
    fn multi_seed_repeats_and_differs() {
        let train_set = noise_data(60, 17);
        let val_set = noise_data(20, 18);
        // a cold start forces rejections, so decision traces can diverge
        let config = TrainingConfig {
            t0: 1e-3,
            epochs: 10,
            batch_size: 8,
            ..tiny_config(OptimizerKind::SgdSa)
        };
        let runs = multi_seed(&config, &[5, 5, 9], &train_set, &val_set).unwrap();
        assert_eq!(runs[0].1, runs[1].1, "equal seeds must match exactly");
        assert_ne!(
            runs[0].1.accept_trace, runs[2].1.accept_trace,
            "different seeds should make different decisions"
        );
        assert!(matches!(
            multi_seed(&config, &[], &train_set, &val_set),
            Err(Error::EmptySeedList)
        ));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let bad_alpha = TrainingConfig {
            alpha: 1.5,
            ..TrainingConfig::default()
        };
        assert!(bad_alpha.validate().is_err());
        let bad_t0 = TrainingConfig {
            t0: 0.0,
            ..TrainingConfig::default()
        };
        assert!(bad_t0.validate().is_err());
        let short_schedule = TrainingConfig {
            optimizer: OptimizerKind::Sgd,
            epochs: 200, // schedule only covers 100
            ..TrainingConfig::default()
        };
        assert!(short_schedule.validate().is_err());
    }

    #[test]
    fn metrics_csv_round_trips_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let record = MetricsRecord {
            epoch: 1,
            train_loss: 0.5,
            train_accuracy: 0.75,
            val_loss: 0.6,
            val_accuracy: 0.7,
            temperature: 0.8,
            mean_accept_prob_clipped: 0.9,
            improving_moves: 3,
            accepted_worsening_moves: 1,
            rejected_moves: 0,
            eta_histogram: vec![2, 2],
        };
        write_metrics_csv(&path, &[record], &[0.9, 0.1]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "epoch,train_loss,train_acc,val_loss,val_acc,temperature,mean_accept_prob,n_improving,n_accepted_worsening,n_rejected,eta_0.9,eta_0.1"
        );
        assert_eq!(lines.next().unwrap(), "1,0.5,0.75,0.6,0.7,0.8,0.9,3,1,0,2,2");
    }
}
