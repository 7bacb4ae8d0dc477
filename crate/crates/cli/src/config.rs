//! Run configurations: JSON files with strict key checking, flag overrides,
//! and a content hash that identifies the experiment.
//!
//! Every subcommand takes one config file. Paths inside a config resolve
//! against the config file's directory, so a run folder can be moved or
//! checked into version control wholesale; paths given on the command line
//! resolve against the working directory as usual. The effective
//! (post-override) configuration is echoed into the output directory, and
//! its hash — extended with the raw bytes of every referenced input file —
//! is embedded in the result files. The output directory itself is excluded
//! from the hash: it changes where results go, never what they contain.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use softtrellis::analysis::{FlipMode, DEFAULT_THRESHOLD};
use softtrellis::bcjr::{MaxStarMode, WrapMode};
use softtrellis::cnn::{load_weights, CnnModel};
use softtrellis::codes::{EncoderSpec, InterleaverSpec};
use softtrellis::sim::StopRule;
use softtrellis::system::LinkOptions;
use softtrellis::trellis::AveragingMode;
use softtrellis::tune::{Optimizer, TrainConfig};
use softtrellis::CodedSystem64;
use std::path::{Path, PathBuf};

use crate::Failure;

/// Parses a config file into `T`, rejecting unknown keys.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

/// Joins `path` onto `base` unless it is already absolute.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Hash builder covering the effective config and the contents of every
/// input file it references. Sixteen hex digits are plenty to tell runs
/// apart and keep the CSV columns readable.
pub struct ConfigHash {
    hasher: Sha256,
}

impl ConfigHash {
    pub fn of<T: Serialize>(effective: &T) -> Result<Self, Failure> {
        let text = serde_json::to_string(effective)
            .map_err(|e| Failure::Config(format!("config not serializable: {e}")))?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        Ok(ConfigHash { hasher })
    }

    /// Folds an input file's bytes into the hash, so the hash changes when
    /// any referenced weights or data change even if the paths do not.
    pub fn input_file(&mut self, path: &Path) -> Result<(), Failure> {
        let bytes = std::fs::read(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        self.hasher.update(&bytes);
        Ok(())
    }

    pub fn finish(self) -> String {
        let digest = self.hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Output directory wrapper: the only place commands are allowed to write.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(root)
            .map_err(|e| Failure::Config(format!("{}: {e}", root.display())))?;
        Ok(OutDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let path = self.path(name);
        std::fs::write(&path, bytes)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    /// Serializes `value` as pretty JSON into `name`.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| Failure::Runtime(format!("{name}: {e}")))?;
        self.write(name, format!("{text}\n").as_bytes())
    }
}

/// How one inner modulator stream starts out.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "init", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnerSpec {
    /// Weights loaded from a file (fine-tuning, decoding, simulation).
    File { path: PathBuf },
    /// Fresh random weights (training from scratch).
    Random {
        hidden_depth: usize,
        layers: usize,
        kernel_size: usize,
        seed: u64,
    },
}

impl InnerSpec {
    fn build(&self, base: &Path) -> Result<CnnModel<f64>, Failure> {
        match self {
            InnerSpec::File { path } => load_weights(&resolve(base, path))
                .map_err(|e| Failure::Config(e.to_string())),
            InnerSpec::Random {
                hidden_depth,
                layers,
                kernel_size,
                seed,
            } => CnnModel::random(1, *hidden_depth, 1, *layers, *kernel_size, *seed)
                .map_err(|e| Failure::Config(e.to_string())),
        }
    }
}

/// Exact log-domain combining or its max-only approximation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecoderMode {
    #[default]
    LogMap,
    MaxLog,
}

/// Decoder construction knobs; all optional with the library defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub iterations: usize,
    pub mode: DecoderMode,
    /// Circular-extension length per decoding stage; `null` picks
    /// `2m + 2` capped at a quarter block.
    pub wrap_steps: Option<usize>,
    pub damping: Option<f64>,
    pub threshold: f64,
    pub memory_budget: Option<usize>,
    pub flip_samples: usize,
    pub calibration_blocks: usize,
    pub spc: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        let d = LinkOptions::default();
        LinkConfig {
            iterations: d.iterations,
            mode: DecoderMode::LogMap,
            wrap_steps: None,
            damping: d.damping,
            threshold: d.threshold,
            memory_budget: d.memory_budget,
            flip_samples: d.flip_samples,
            calibration_blocks: d.calibration_blocks,
            spc: d.spc,
        }
    }
}

impl LinkConfig {
    pub fn to_options(&self, seed: u64) -> LinkOptions {
        LinkOptions {
            iterations: self.iterations,
            mode: match self.mode {
                DecoderMode::LogMap => MaxStarMode::LogMap,
                DecoderMode::MaxLog => MaxStarMode::MaxLog,
            },
            wrap: self.wrap_steps.map(|steps| WrapMode::Wrap { steps }),
            damping: self.damping,
            threshold: self.threshold,
            memory_budget: self.memory_budget,
            flip_samples: self.flip_samples,
            calibration_blocks: self.calibration_blocks,
            spc: self.spc,
            seed,
        }
    }
}

/// A complete coded link: outer code, interleaver, inner modulators, and
/// the decoder built to match.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub block_len: usize,
    pub outer: EncoderSpec,
    pub interleaver: InterleaverSpec,
    pub inner: Vec<InnerSpec>,
    #[serde(default)]
    pub link: LinkConfig,
}

impl SystemConfig {
    /// Builds the link. Everything here is validation and table
    /// construction, so failures are config errors.
    pub fn assemble(&self, base: &Path, seed: u64) -> Result<CodedSystem64, Failure> {
        let outer = self
            .outer
            .build_bank()
            .map_err(|e| Failure::Config(e.to_string()))?;
        let interleaver = self
            .interleaver
            .build(self.block_len)
            .map_err(|e| Failure::Config(e.to_string()))?;
        let inner = self
            .inner
            .iter()
            .map(|spec| spec.build(base))
            .collect::<Result<Vec<_>, _>>()?;
        let opts = self.link.to_options(seed);
        CodedSystem64::assemble(outer, interleaver, inner, &opts)
            .map_err(|e| Failure::Config(e.to_string()))
    }

    /// Folds referenced weight files into the experiment hash.
    pub fn hash_inputs(&self, base: &Path, hash: &mut ConfigHash) -> Result<(), Failure> {
        for spec in &self.inner {
            if let InnerSpec::File { path } = spec {
                hash.input_file(&resolve(base, path))?;
            }
        }
        Ok(())
    }
}

/// What `analyze` and `build-trellis` probe: a weights file viewed as a
/// block encoder, or an explicit encoder description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeSource {
    Weights {
        path: PathBuf,
        /// Treat outputs as hard bits through the sign quantizer.
        #[serde(default)]
        binarized: bool,
    },
    Encoder { spec: EncoderSpec },
}

/// Exhaustive or sampled probing for flip profiles and symbol averaging.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeMode {
    #[default]
    Exact,
    Sampled { count: usize },
}

impl ProbeMode {
    pub fn flip_mode(&self, seed: u64) -> FlipMode {
        match *self {
            ProbeMode::Exact => FlipMode::Exact,
            ProbeMode::Sampled { count } => FlipMode::Sampled { count, seed },
        }
    }

    pub fn averaging(&self) -> AveragingMode {
        match *self {
            ProbeMode::Exact => AveragingMode::Exact,
            ProbeMode::Sampled { count } => AveragingMode::Sampled { count },
        }
    }
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_frozen_trials() -> usize {
    4096
}

/// `analyze`: memory profiles and stream health for an encoder.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub out: PathBuf,
    pub source: ProbeSource,
    /// Output streams to profile; `null` profiles all of them.
    #[serde(default)]
    pub streams: Option<Vec<usize>>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub mode: ProbeMode,
    /// Random blocks for the sign-freeze scan when enumeration is too wide.
    #[serde(default = "default_frozen_trials")]
    pub frozen_trials: usize,
    #[serde(default)]
    pub seed: u64,
}

/// `build-trellis`: finite-state table for one encoder stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildTrellisConfig {
    pub out: PathBuf,
    pub source: ProbeSource,
    /// Output stream the table is built for (weights sources only).
    #[serde(default)]
    pub stream: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub mode: ProbeMode,
    #[serde(default)]
    pub memory_budget: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

/// `decode`: run the receiver on a file of channel observations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeConfig {
    pub out: PathBuf,
    pub system: SystemConfig,
    /// CSV of received symbols: one row per block position, one column per
    /// channel use, no header.
    pub input: PathBuf,
    /// Noise variance per real dimension; alternative to `ebn0_db`.
    #[serde(default)]
    pub sigma2: Option<f64>,
    #[serde(default)]
    pub ebn0_db: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

/// What `simulate` sweeps: the full coded link or an analytic reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimSystem {
    Coded { system: SystemConfig },
    /// BPSK over AWGN, bit error rate Q(1/sigma).
    UncodedBpsk { block_len: usize },
    /// Rate-1/2 repetition with ML combining, bit error rate Q(sqrt(2)/sigma).
    RepetitionPair { block_len: usize },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopConfig {
    pub min_block_errors: u64,
    pub max_blocks: u64,
}

impl Default for StopConfig {
    fn default() -> Self {
        let d = StopRule::default();
        StopConfig {
            min_block_errors: d.min_block_errors,
            max_blocks: d.max_blocks,
        }
    }
}

impl StopConfig {
    pub fn to_rule(self) -> StopRule {
        StopRule {
            min_block_errors: self.min_block_errors,
            max_blocks: self.max_blocks,
        }
    }
}

/// `simulate`: Monte-Carlo error-rate sweep over Eb/N0 points.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub out: PathBuf,
    pub seed: u64,
    pub system: SimSystem,
    pub ebn0_db: Vec<f64>,
    #[serde(default)]
    pub stop: StopConfig,
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        if self.ebn0_db.is_empty() {
            return Err(Failure::Config("ebn0_db list must not be empty".into()));
        }
        if let Some(bad) = self.ebn0_db.iter().find(|v| !v.is_finite()) {
            return Err(Failure::Config(format!(
                "ebn0_db values must be finite, got {bad}"
            )));
        }
        if self.stop.max_blocks == 0 {
            return Err(Failure::Config("max_blocks must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerSpec {
    Adam { lr: f64 },
    Sgd { lr: f64 },
}

impl OptimizerSpec {
    pub fn build(self) -> Optimizer {
        match self {
            OptimizerSpec::Adam { lr } => Optimizer::adam(lr),
            OptimizerSpec::Sgd { lr } => Optimizer::sgd(lr),
        }
    }
}

fn default_refresh() -> usize {
    1
}

fn default_train_iterations() -> usize {
    2
}

/// Training-loop parameters shared by `finetune` and `train-inner`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub batch: usize,
    pub updates: usize,
    pub snr_db: f64,
    pub optimizer: OptimizerSpec,
    /// Decoder iterations unrolled inside the loss.
    #[serde(default = "default_train_iterations")]
    pub iterations: usize,
    /// Updates between symbol-table rebuilds; 1 is exact, 10 is the
    /// documented fast mode.
    #[serde(default = "default_refresh")]
    pub refresh_period: usize,
}

impl TrainSpec {
    pub fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch: self.batch,
            optimizer: self.optimizer.build(),
            snr_db: self.snr_db,
            iterations: self.iterations,
            updates: self.updates,
            seed,
            refresh_period: self.refresh_period,
        }
    }
}

/// `finetune` / `train-inner`: optimize the modulators inside a link.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainCommandConfig {
    pub out: PathBuf,
    pub seed: u64,
    pub system: SystemConfig,
    pub train: TrainSpec,
}

/// `gen-weights`: seeded random starting points for experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenWeightsConfig {
    pub out: PathBuf,
    pub seed: u64,
    pub hidden_depth: usize,
    pub layers: usize,
    pub kernel_size: usize,
    /// Number of models to emit; model `i` uses `seed + i`.
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_in_depth")]
    pub in_depth: usize,
    #[serde(default = "default_in_depth")]
    pub out_depth: usize,
}

fn default_count() -> usize {
    1
}

fn default_in_depth() -> usize {
    1
}
