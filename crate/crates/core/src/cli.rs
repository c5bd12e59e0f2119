//! Command-line entry point: `train`, `multi-seed`, `evaluate`, `gradcheck`.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. The default
//! output root is `$SGDSA_OUT_ROOT` (falling back to `./runs`), with one
//! subdirectory per config digest.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{self, Dataset, Standardizer};
use crate::error::Error;
use crate::harness::{
    self, CoolingInterval, OptimizerKind, SeedSummary, TrainResult, TrainingConfig,
};
use crate::gradcheck;
use crate::nn::{self, Activation};
use crate::optim::LearningRateSet;
use crate::rng::{Purpose, RngState};

const OUT_ROOT_ENV: &str = "SGDSA_OUT_ROOT";
const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(name = "sgdsa", version, about = "Train small MLPs with annealed learning-rate selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one network and write metrics, summary, and the best checkpoint.
    Train(TrainArgs),
    /// Repeat a training run over several seeds and tabulate the results.
    MultiSeed(MultiSeedArgs),
    /// Evaluate a checkpoint on a dataset.
    Evaluate(EvaluateArgs),
    /// Compare backprop gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// IDX image file (use together with --labels)
    #[arg(long, requires = "labels", conflicts_with = "csv")]
    images: Option<PathBuf>,
    /// IDX label file
    #[arg(long, requires = "images", conflicts_with = "csv")]
    labels: Option<PathBuf>,
    /// CSV file with a header row (use together with --label-column)
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Name of the label column in the CSV file
    #[arg(long, requires = "csv")]
    label_column: Option<String>,
    /// Standardize features to mean 0 / variance 1 (statistics from the
    /// training split only)
    #[arg(long)]
    standardize: bool,
}

impl DataArgs {
    fn load(&self) -> Result<(Dataset, Option<Vec<String>>), CliError> {
        match (&self.images, &self.labels, &self.csv) {
            (Some(images), Some(labels), None) => {
                let d = data::load_idx(images, labels).map_err(CliError::Runtime)?;
                Ok((d, None))
            }
            (None, None, Some(csv)) => {
                let column = self.label_column.as_deref().ok_or_else(|| {
                    CliError::Usage("--csv requires --label-column".to_string())
                })?;
                let (d, names) = data::load_csv(csv, column).map_err(CliError::Runtime)?;
                Ok((d, Some(names)))
            }
            _ => Err(CliError::Usage(
                "missing dataset: pass --images/--labels or --csv/--label-column".to_string(),
            )),
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Optimizer: sgd (scheduled baseline), sgd-sa, or ssa
    #[arg(long, value_enum, default_value = "sgd-sa")]
    optimizer: OptimizerArg,
    /// Hidden layer widths, comma separated
    #[arg(long, value_delimiter = ',', default_value = "32,16")]
    hidden: Vec<usize>,
    /// Hidden activation
    #[arg(long, value_enum, default_value = "relu")]
    activation: ActivationArg,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 512)]
    batch_size: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Initial temperature
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    /// Cooling factor in (0,1); defaults to 0.8 (0.97 for ssa)
    #[arg(long)]
    alpha: Option<f64>,
    /// Candidate learning rates for sgd-sa, comma separated
    #[arg(long, value_parser = parse_rate_list)]
    lr_set: Option<LearningRateSet>,
    /// Baseline SGD schedule as span:rate pairs, e.g. 30:0.1,40:0.01,30:0.001
    #[arg(long, value_delimiter = ',', value_parser = parse_schedule_pair)]
    schedule: Option<Vec<(usize, f64)>>,
    /// Step scale for ssa
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fraction of samples held out for validation
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    /// Seed for the train/validation split (kept apart from --seed so all
    /// run seeds share one partition)
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Cool once per epoch (default) or after every minibatch step
    #[arg(long, value_enum, default_value = "epoch")]
    cooling_per: CoolingArg,
    /// Output directory; defaults to <out-root>/<config digest>
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct MultiSeedArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Seeds to run, comma separated (--seed is ignored)
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    seeds: Vec<u64>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Checkpoint file written by `train`
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 512)]
    batch_size: usize,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 3)]
    seed: u64,
    /// Number of random network specs to probe
    #[arg(long, default_value_t = 50)]
    specs: usize,
    /// Random coordinates probed per spec
    #[arg(long, default_value_t = 40)]
    coords: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum OptimizerArg {
    Sgd,
    SgdSa,
    Ssa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum ActivationArg {
    Relu,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum CoolingArg {
    Epoch,
    Iteration,
}

fn parse_rate_list(s: &str) -> Result<LearningRateSet, String> {
    let rates: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, String>>()?;
    LearningRateSet::new(rates).map_err(|e| e.to_string())
}

fn parse_schedule_pair(pair: &str) -> Result<(usize, f64), String> {
    let (span, rate) = pair
        .split_once(':')
        .ok_or_else(|| format!("{pair:?}: expected span:rate"))?;
    let span = span.trim().parse::<usize>().map_err(|e| format!("{span:?}: {e}"))?;
    let rate = rate.trim().parse::<f64>().map_err(|e| format!("{rate:?}: {e}"))?;
    Ok((span, rate))
}

enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

/// Parse `argv` and run the selected subcommand, returning the process exit
/// status (0 success, 1 usage error, 2 runtime error).
pub fn parse_and_run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::MultiSeed(args) => cmd_multi_seed(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

impl RunArgs {
    /// Resolve flags into a validated [`TrainingConfig`], rejecting flags
    /// that belong to a different optimizer.
    fn resolve_config(&self) -> Result<TrainingConfig, CliError> {
        let optimizer = match self.optimizer {
            OptimizerArg::Sgd => OptimizerKind::Sgd,
            OptimizerArg::SgdSa => OptimizerKind::SgdSa,
            OptimizerArg::Ssa => OptimizerKind::Ssa,
        };

        let conflict = |flag: &str, applies: &str| {
            CliError::Usage(format!(
                "{flag} applies only to --optimizer {applies}, but --optimizer {} was selected",
                match optimizer {
                    OptimizerKind::Sgd => "sgd",
                    OptimizerKind::SgdSa => "sgd-sa",
                    OptimizerKind::Ssa => "ssa",
                }
            ))
        };
        if self.lr_set.is_some() && optimizer != OptimizerKind::SgdSa {
            return Err(conflict("--lr-set", "sgd-sa"));
        }
        if self.schedule.is_some() && optimizer != OptimizerKind::Sgd {
            return Err(conflict("--schedule", "sgd"));
        }
        if self.epsilon.is_some() && optimizer != OptimizerKind::Ssa {
            return Err(conflict("--epsilon", "ssa"));
        }

        let alpha = self.alpha.unwrap_or(match optimizer {
            OptimizerKind::Ssa => 0.97,
            _ => 0.8,
        });
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CliError::Usage(format!(
                "--alpha must lie in the open interval (0,1), got {alpha}"
            )));
        }
        if !self.t0.is_finite() || self.t0 <= 0.0 {
            return Err(CliError::Usage(format!(
                "--t0 must be positive, got {}",
                self.t0
            )));
        }
        let epsilon = self.epsilon.unwrap_or(0.01);
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(CliError::Usage(format!(
                "--epsilon must be positive, got {epsilon}"
            )));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(CliError::Usage(format!(
                "--val-fraction must lie in (0,1), got {}",
                self.val_fraction
            )));
        }

        let config = TrainingConfig {
            optimizer,
            hidden_layers: self.hidden.clone(),
            activation: match self.activation {
                ActivationArg::Relu => Activation::Relu,
                ActivationArg::Tanh => Activation::Tanh,
            },
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            t0: self.t0,
            alpha,
            lr_set: self.lr_set.clone().unwrap_or_default(),
            schedule: self
                .schedule
                .clone()
                .unwrap_or_else(|| vec![(30, 0.1), (40, 0.01), (30, 0.001)]),
            epsilon,
            val_fraction: self.val_fraction,
            cooling_per: match self.cooling_per {
                CoolingArg::Epoch => CoolingInterval::Epoch,
                CoolingArg::Iteration => CoolingInterval::Iteration,
            },
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }

    fn out_dir(&self, digest: &str) -> PathBuf {
        match &self.out {
            Some(dir) => dir.clone(),
            None => {
                let root = std::env::var_os(OUT_ROOT_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("runs"));
                root.join(digest)
            }
        }
    }

    /// Load, optionally standardize, and split the dataset.
    fn prepare_data(&self) -> Result<(Dataset, Dataset, Option<Vec<String>>), CliError> {
        let (full, label_names) = self.data.load()?;
        let mut split_rng = RngState::new_master(self.data_seed).substream(Purpose::Shuffle);
        let (mut train, mut val) = data::split(&full, self.val_fraction, &mut split_rng)?;
        if self.data.standardize {
            let standardizer = Standardizer::fit(&train);
            train = standardizer.apply(&train)?;
            val = standardizer.apply(&val)?;
        }
        Ok((train, val, label_names))
    }
}

#[derive(serde::Serialize)]
struct DatasetInfo {
    train_samples: usize,
    val_samples: usize,
    feature_dim: usize,
    class_count: usize,
    standardized: bool,
    data_seed: u64,
}

#[derive(serde::Serialize)]
struct RunMetadata<'a> {
    tool_version: &'static str,
    config: &'a TrainingConfig,
    config_digest: String,
    dataset: DatasetInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    label_names: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds: Option<Vec<u64>>,
    curve_semantics: &'static str,
    best_epoch: usize,
    best_val_accuracy: f64,
}

const CURVE_SEMANTICS: &str = "train_loss/train_acc are sample-weighted running means of pre-step \
     minibatch values over the epoch; temperature is the post-cooling value t0*alpha^epoch; \
     validation columns come from a full pass at epoch end";

fn write_run_outputs(
    dir: &Path,
    config: &TrainingConfig,
    result: &TrainResult,
    seed: u64,
) -> Result<(), CliError> {
    let eta_rates: Vec<f64> = if config.optimizer == OptimizerKind::SgdSa {
        config.lr_set.rates().to_vec()
    } else {
        Vec::new()
    };
    harness::write_metrics_csv(&dir.join("metrics.csv"), &result.log, &eta_rates)?;
    let last = result.log.last().expect("non-empty log");
    harness::write_summary_csv(
        &dir.join("summary.csv"),
        &[SeedSummary {
            seed,
            final_val_loss: last.val_loss,
            final_val_accuracy: last.val_accuracy,
            best_val_accuracy: result.best.val_accuracy,
            best_epoch: result.best.epoch,
        }],
    )?;
    nn::save_checkpoint(&dir.join("best.ckpt"), &result.best.spec, &result.best.weights)?;
    Ok(())
}

fn write_metadata(dir: &Path, metadata: &RunMetadata) -> Result<(), CliError> {
    let path = dir.join("run-metadata.json");
    let json = serde_json::to_string_pretty(metadata)
        .map_err(|e| CliError::Usage(format!("metadata serialization failed: {e}")))?;
    std::fs::write(&path, json + "\n").map_err(|source| {
        CliError::Runtime(Error::Io {
            path: path.clone(),
            source,
        })
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Runtime(Error::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let config = args.run.resolve_config()?;
    let (train_set, val_set, label_names) = args.run.prepare_data()?;
    let digest = config.digest();
    let dir = args.run.out_dir(&digest);
    create_dir(&dir)?;

    let result = harness::train(&config, &train_set, &val_set)?;
    write_run_outputs(&dir, &config, &result, config.seed)?;
    write_metadata(
        &dir,
        &RunMetadata {
            tool_version: env!("CARGO_PKG_VERSION"),
            config: &config,
            config_digest: digest,
            dataset: DatasetInfo {
                train_samples: train_set.len(),
                val_samples: val_set.len(),
                feature_dim: train_set.feature_dim(),
                class_count: train_set.class_count(),
                standardized: args.run.data.standardize,
                data_seed: args.run.data_seed,
            },
            label_names,
            seeds: None,
            curve_semantics: CURVE_SEMANTICS,
            best_epoch: result.best.epoch,
            best_val_accuracy: result.best.val_accuracy,
        },
    )?;

    let last = result.log.last().expect("non-empty log");
    println!(
        "seed {} | final val loss {:.6} acc {:.4} | best val acc {:.4} at epoch {} | out {}",
        config.seed,
        last.val_loss,
        last.val_accuracy,
        result.best.val_accuracy,
        result.best.epoch,
        dir.display()
    );
    Ok(())
}

fn cmd_multi_seed(args: MultiSeedArgs) -> Result<(), CliError> {
    if args.seeds.is_empty() {
        return Err(CliError::Usage("--seeds must name at least one seed".into()));
    }
    let config = args.run.resolve_config()?;
    let (train_set, val_set, label_names) = args.run.prepare_data()?;
    let digest = config.digest();
    let dir = args.run.out_dir(&digest);
    create_dir(&dir)?;

    let runs = harness::multi_seed(&config, &args.seeds, &train_set, &val_set)?;
    for (seed, result) in &runs {
        let seed_dir = dir.join(format!("seed-{seed}"));
        create_dir(&seed_dir)?;
        let seed_config = TrainingConfig {
            seed: *seed,
            ..config.clone()
        };
        write_run_outputs(&seed_dir, &seed_config, result, *seed)?;
    }
    let summary = harness::summarize(&runs);
    harness::write_summary_csv(&dir.join("summary.csv"), &summary)?;

    let best_overall = summary
        .iter()
        .max_by(|a, b| a.best_val_accuracy.total_cmp(&b.best_val_accuracy))
        .expect("non-empty");
    write_metadata(
        &dir,
        &RunMetadata {
            tool_version: env!("CARGO_PKG_VERSION"),
            config: &config,
            config_digest: digest,
            dataset: DatasetInfo {
                train_samples: train_set.len(),
                val_samples: val_set.len(),
                feature_dim: train_set.feature_dim(),
                class_count: train_set.class_count(),
                standardized: args.run.data.standardize,
                data_seed: args.run.data_seed,
            },
            label_names,
            seeds: Some(args.seeds.clone()),
            curve_semantics: CURVE_SEMANTICS,
            best_epoch: best_overall.best_epoch,
            best_val_accuracy: best_overall.best_val_accuracy,
        },
    )?;

    for row in &summary {
        println!(
            "seed {} | final val loss {:.6} acc {:.4} | best val acc {:.4} at epoch {}",
            row.seed, row.final_val_loss, row.final_val_accuracy, row.best_val_accuracy, row.best_epoch
        );
    }
    println!("out {}", dir.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let (dataset, _) = args.data.load()?;
    if args.batch_size == 0 {
        return Err(CliError::Usage("--batch-size must be at least 1".into()));
    }
    let (spec, weights) = nn::load_checkpoint(&args.checkpoint)?;
    if spec.input_dim() != dataset.feature_dim() {
        return Err(CliError::Runtime(Error::DimensionMismatch {
            expected: spec.input_dim(),
            got: dataset.feature_dim(),
            context: "checkpoint input dimension vs dataset",
        }));
    }
    let (loss, accuracy) = harness::evaluate(&spec, &weights, &dataset, args.batch_size)?;
    println!("loss {loss:.6} accuracy {accuracy:.4} over {} samples", dataset.len());
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<(), CliError> {
    let report = gradcheck::run(args.seed, args.specs, args.coords)?;
    println!(
        "max relative gradient error {:.3e} over {} specs x {} coordinates",
        report.max_rel_error, report.specs_checked, args.coords
    );
    if report.max_rel_error < GRADCHECK_TOLERANCE {
        Ok(())
    } else {
        Err(CliError::Runtime(Error::InvalidConfig(format!(
            "gradient check failed: max relative error {} >= {GRADCHECK_TOLERANCE}",
            report.max_rel_error
        ))))
    }
}
