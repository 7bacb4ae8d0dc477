//! The subcommand implementations.
//!
//! Each command follows the same shape: load and validate the config
//! (failures exit 2), echo the effective configuration into the output
//! directory, run the computation (failures exit 3), and write results only
//! under that directory. Identical config and seed reproduce every output
//! byte for byte.

use serde::de::DeserializeOwned;
use serde::Serialize;
use softtrellis::analysis::{
    detect_frozen_outputs, estimate_memory, flip_energy, grad_energy, split_fidelity,
    split_inner_streams, trim_to_budget, write_profile_csv, EnergyProfile, FrozenStatus,
    GradEnergyConfig, MemoryProfile,
};
use softtrellis::cnn::{save_weights, CnnEncoder, CnnModel};
use softtrellis::codes::{BlockEncoder, EncoderSpec};
use softtrellis::sim::{
    run_monte_carlo, snr_to_sigma2, write_plotdata, write_report_csv, BlockSystem, SimReport,
    UncodedBpsk,
};
use softtrellis::sim::RepetitionPair;
use softtrellis::trellis::Trellis;
use softtrellis::tune::{train_modulators, write_loss_csv, Validation};
use softtrellis::{Error, Tensor64};
use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::{
    load_config, resolve, AnalyzeConfig, BuildTrellisConfig, ConfigHash, DecodeConfig,
    GenWeightsConfig, InnerSpec, OutDir, ProbeMode, ProbeSource, SimSystem, SimulateConfig,
    TrainCommandConfig,
};
use crate::{Failure, RunArgs};

fn config_err(e: impl Display) -> Failure {
    Failure::Config(e.to_string())
}

fn runtime_err(e: impl Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Per-command config files all carry an output directory and a master seed
/// that command-line flags may override.
pub trait RunConfigFile: Serialize + DeserializeOwned + Clone {
    fn out_mut(&mut self) -> &mut PathBuf;
    fn seed_mut(&mut self) -> &mut u64;
}

macro_rules! run_config_file {
    ($ty:ty) => {
        impl RunConfigFile for $ty {
            fn out_mut(&mut self) -> &mut PathBuf {
                &mut self.out
            }
            fn seed_mut(&mut self) -> &mut u64 {
                &mut self.seed
            }
        }
    };
}

run_config_file!(AnalyzeConfig);
run_config_file!(BuildTrellisConfig);
run_config_file!(DecodeConfig);
run_config_file!(SimulateConfig);
run_config_file!(TrainCommandConfig);
run_config_file!(GenWeightsConfig);

/// Loaded config with overrides applied, the created output directory, and
/// a hash builder ready to take input files.
struct Prepared<T> {
    cfg: T,
    /// Directory of the config file; in-config paths resolve against it.
    base: PathBuf,
    out: OutDir,
    hash: ConfigHash,
}

fn prepare<T: RunConfigFile>(args: &RunArgs) -> Result<Prepared<T>, Failure> {
    let mut cfg: T = load_config(&args.config)?;
    let base = args
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    if let Some(seed) = args.seed {
        *cfg.seed_mut() = seed;
    }
    let out_path = match &args.out {
        Some(p) => p.clone(),
        None => resolve(&base, cfg.out_mut()),
    };
    *cfg.out_mut() = out_path.clone();
    let out = OutDir::create(&out_path)?;

    // The hash identifies the experiment, so the output location stays out.
    let mut hashed = cfg.clone();
    *hashed.out_mut() = PathBuf::new();
    let hash = ConfigHash::of(&hashed)?;

    out.write_json("effective-config.json", &cfg)?;
    Ok(Prepared {
        cfg,
        base,
        out,
        hash,
    })
}

/// An encoder to probe, plus the profile machinery appropriate to it.
enum Probe {
    Cnn(CnnEncoder<f64>),
    Bank(softtrellis::codes::PolynomialBank),
    Table(softtrellis::codes::TableEncoder<f64>),
}

impl Probe {
    fn build(source: &ProbeSource, base: &Path, hash: &mut ConfigHash) -> Result<Self, Failure> {
        match source {
            ProbeSource::Weights { path, binarized } => {
                let full = resolve(base, path);
                hash.input_file(&full)?;
                let model: CnnModel<f64> =
                    softtrellis::cnn::load_weights(&full).map_err(config_err)?;
                Ok(Probe::Cnn(CnnEncoder::new(model, *binarized)))
            }
            ProbeSource::Encoder { spec } => match spec {
                EncoderSpec::Table { .. } => Ok(Probe::Table(
                    spec.build_table::<f64>().map_err(config_err)?,
                )),
                _ => Ok(Probe::Bank(spec.build_bank().map_err(config_err)?)),
            },
        }
    }
}

#[derive(Serialize)]
struct StreamReport {
    stream: usize,
    memory: usize,
    j: (isize, isize),
    memoryless: bool,
    bpsk_like: bool,
    frozen: &'static str,
}

impl StreamReport {
    fn new(stream: usize, profile: &MemoryProfile, frozen: FrozenStatus) -> Self {
        StreamReport {
            stream,
            memory: profile.memory(),
            j: profile.j(),
            memoryless: profile.memoryless(),
            bpsk_like: profile.is_bpsk_like(),
            frozen: match frozen {
                FrozenStatus::Active => "active",
                FrozenStatus::FrozenPlus => "frozen_plus",
                FrozenStatus::FrozenMinus => "frozen_minus",
            },
        }
    }
}

#[derive(Serialize)]
struct AnalyzeSummary {
    config_hash: String,
    threshold: f64,
    window: (isize, isize),
    #[serde(skip_serializing_if = "Option::is_none")]
    split_max_deviation: Option<f64>,
    streams: Vec<StreamReport>,
}

/// One profiled output stream: flip energies always, gradient energies when
/// the encoder is differentiable.
type Profiled = (usize, EnergyProfile<f64>, Option<EnergyProfile<f64>>);

fn selected_streams(selector: &Option<Vec<usize>>, depth: usize) -> Result<Vec<usize>, Failure> {
    let streams = match selector {
        Some(list) if list.is_empty() => {
            return Err(Failure::Config("stream selector must not be empty".into()))
        }
        Some(list) => list.clone(),
        None => (0..depth).collect(),
    };
    if let Some(&bad) = streams.iter().find(|&&s| s >= depth) {
        return Err(Failure::Config(format!(
            "stream {bad} out of range: encoder has {depth} output streams"
        )));
    }
    Ok(streams)
}

pub fn analyze(args: &RunArgs, threshold: Option<f64>) -> Result<(), Failure> {
    let mut p: Prepared<AnalyzeConfig> = prepare(args)?;
    if let Some(t) = threshold {
        p.cfg.threshold = t;
        // Re-echo with the override folded in.
        p.out.write_json("effective-config.json", &p.cfg)?;
        let mut hashed = p.cfg.clone();
        hashed.out = PathBuf::new();
        p.hash = ConfigHash::of(&hashed)?;
    }
    let cfg = &p.cfg;
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(Failure::Config(format!(
            "threshold must sit strictly between 0 and 1, got {}",
            cfg.threshold
        )));
    }
    let probe = Probe::build(&cfg.source, &p.base, &mut p.hash)?;
    let config_hash = p.hash.finish();

    let flip_mode = cfg.mode.flip_mode(cfg.seed);
    let mut split_max_deviation = None;
    let (profiled, frozen, window): (Vec<Profiled>, Vec<FrozenStatus>, (isize, isize)) =
        match &probe {
            Probe::Cnn(enc) if enc.input_depth() == 1 => {
                let streams = selected_streams(&cfg.streams, enc.output_depth())?;
                let rows = streams
                    .iter()
                    .map(|&d| {
                        let flip = flip_energy(enc, d, flip_mode).map_err(config_err)?;
                        let grad = grad_energy(enc, &GradEnergyConfig::new(d, cfg.seed))
                            .map_err(config_err)?;
                        Ok((d, flip, Some(grad)))
                    })
                    .collect::<Result<Vec<_>, Failure>>()?;
                let frozen =
                    detect_frozen_outputs(enc, cfg.frozen_trials, cfg.seed).map_err(config_err)?;
                (rows, frozen, enc.window())
            }
            Probe::Cnn(enc) => {
                // Two-stream modulators are profiled through their
                // single-stream views; report how faithful the split is.
                let (s0, s1) = split_inner_streams(enc).map_err(config_err)?;
                split_max_deviation = Some(
                    split_fidelity(enc, cfg.frozen_trials.max(1), cfg.seed)
                        .map_err(config_err)?,
                );
                let streams = selected_streams(&cfg.streams, 2)?;
                let rows = streams
                    .iter()
                    .map(|&d| {
                        let slice = if d == 0 { &s0 } else { &s1 };
                        let flip = flip_energy(slice, 0, flip_mode).map_err(config_err)?;
                        let grad = grad_energy(slice, &GradEnergyConfig::new(0, cfg.seed))
                            .map_err(config_err)?;
                        Ok((d, flip, Some(grad)))
                    })
                    .collect::<Result<Vec<_>, Failure>>()?;
                let frozen =
                    detect_frozen_outputs(enc, cfg.frozen_trials, cfg.seed).map_err(config_err)?;
                (rows, frozen, s0.window())
            }
            Probe::Bank(enc) => {
                let depth = BlockEncoder::<f64>::output_depth(enc);
                let streams = selected_streams(&cfg.streams, depth)?;
                let rows = streams
                    .iter()
                    .map(|&d| {
                        let flip = flip_energy(enc, d, flip_mode).map_err(config_err)?;
                        Ok((d, flip, None))
                    })
                    .collect::<Result<Vec<_>, Failure>>()?;
                let frozen = detect_frozen_outputs::<f64, _>(enc, cfg.frozen_trials, cfg.seed)
                    .map_err(config_err)?;
                (rows, frozen, BlockEncoder::<f64>::window(enc))
            }
            Probe::Table(enc) => {
                let streams = selected_streams(&cfg.streams, enc.output_depth())?;
                let rows = streams
                    .iter()
                    .map(|&d| {
                        let flip = flip_energy(enc, d, flip_mode).map_err(config_err)?;
                        Ok((d, flip, None))
                    })
                    .collect::<Result<Vec<_>, Failure>>()?;
                let frozen =
                    detect_frozen_outputs(enc, cfg.frozen_trials, cfg.seed).map_err(config_err)?;
                (rows, frozen, enc.window())
            }
        };

    let mut reports = Vec::with_capacity(profiled.len());
    for (d, flip, grad) in &profiled {
        let name = format!("profile_stream{d}.csv");
        let file = File::create(p.out.path(&name)).map_err(runtime_err)?;
        let mut w = BufWriter::new(file);
        write_profile_csv(&mut w, grad.as_ref(), Some(flip), cfg.threshold)
            .map_err(runtime_err)?;
        w.flush().map_err(runtime_err)?;
        let profile = estimate_memory(flip, cfg.threshold);
        let status = frozen.get(*d).copied().unwrap_or(FrozenStatus::Active);
        reports.push(StreamReport::new(*d, &profile, status));
    }

    let summary = AnalyzeSummary {
        config_hash: config_hash.clone(),
        threshold: cfg.threshold,
        window,
        split_max_deviation,
        streams: reports,
    };
    p.out.write_json("summary.json", &summary)?;
    for s in &summary.streams {
        println!(
            "stream {}: m = {}, J = [{}, {}]{}{}",
            s.stream,
            s.memory,
            s.j.0,
            s.j.1,
            if s.bpsk_like { " (plain antipodal)" } else { "" },
            if s.frozen == "active" {
                String::new()
            } else {
                format!(" [{}]", s.frozen)
            },
        );
    }
    println!(
        "wrote {} profile file(s) and summary.json (config {config_hash})",
        summary.streams.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrellisSummary {
    config_hash: String,
    memory: usize,
    states: usize,
    window: (isize, isize),
    j: (isize, isize),
    file: String,
}

pub fn build_trellis(args: &RunArgs, threshold: Option<f64>) -> Result<(), Failure> {
    let mut p: Prepared<BuildTrellisConfig> = prepare(args)?;
    if let Some(t) = threshold {
        p.cfg.threshold = t;
        p.out.write_json("effective-config.json", &p.cfg)?;
        let mut hashed = p.cfg.clone();
        hashed.out = PathBuf::new();
        p.hash = ConfigHash::of(&hashed)?;
    }
    let cfg = &p.cfg;
    let probe = Probe::build(&cfg.source, &p.base, &mut p.hash)?;
    let config_hash = p.hash.finish();

    let (trellis, profile): (Trellis<f64>, MemoryProfile) = match &probe {
        Probe::Cnn(enc) if enc.input_depth() == 1 => {
            build_stream_trellis(enc, cfg)?
        }
        Probe::Cnn(enc) => {
            let (s0, s1) = split_inner_streams(enc).map_err(config_err)?;
            if cfg.stream >= 2 {
                return Err(Failure::Config(format!(
                    "stream {} out of range: split modulators expose streams 0 and 1",
                    cfg.stream
                )));
            }
            if cfg.stream == 0 {
                build_stream_trellis(&s0, cfg)?
            } else {
                build_stream_trellis(&s1, cfg)?
            }
        }
        // Explicit encoders get the exact joint table over their window.
        Probe::Bank(enc) => {
            let t = Trellis::from_encoder_exact(enc).map_err(config_err)?;
            let (lo, hi) = BlockEncoder::<f64>::window(enc);
            let prof = MemoryProfile::explicit((lo, hi), lo, hi).map_err(config_err)?;
            (t, prof)
        }
        Probe::Table(enc) => {
            let t = Trellis::from_encoder_exact(enc).map_err(config_err)?;
            let (lo, hi) = enc.window();
            let prof = MemoryProfile::explicit((lo, hi), lo, hi).map_err(config_err)?;
            (t, prof)
        }
    };

    let path = p.out.path("trellis.strl");
    let file = File::create(&path).map_err(runtime_err)?;
    let mut w = BufWriter::new(file);
    trellis.save(&mut w).map_err(runtime_err)?;
    w.flush().map_err(runtime_err)?;

    let summary = TrellisSummary {
        config_hash: config_hash.clone(),
        memory: trellis.memory(),
        states: trellis.num_states(),
        window: profile.window(),
        j: profile.j(),
        file: "trellis.strl".into(),
    };
    p.out.write_json("summary.json", &summary)?;
    println!(
        "trellis: m = {}, {} states, J = [{}, {}] -> trellis.strl (config {config_hash})",
        summary.memory, summary.states, summary.j.0, summary.j.1
    );
    Ok(())
}

/// Profile one stream of a soft encoder, trim to any memory budget, and
/// average the encoder into a symbol table.
fn build_stream_trellis<E: BlockEncoder<f64>>(
    enc: &E,
    cfg: &BuildTrellisConfig,
) -> Result<(Trellis<f64>, MemoryProfile), Failure> {
    let depth = enc.output_depth();
    if cfg.stream >= depth {
        return Err(Failure::Config(format!(
            "stream {} out of range: encoder has {depth} output streams",
            cfg.stream
        )));
    }
    let flip = flip_energy(enc, cfg.stream, cfg.mode.flip_mode(cfg.seed)).map_err(config_err)?;
    let mut profile = estimate_memory(&flip, cfg.threshold);
    if let Some(budget) = cfg.memory_budget {
        profile = trim_to_budget(&flip, &profile, budget).map_err(config_err)?;
    }
    let averaging = match cfg.mode {
        ProbeMode::Exact => softtrellis::trellis::AveragingMode::Auto,
        other => other.averaging(),
    };
    let trellis =
        Trellis::from_profile(enc, &profile, averaging, cfg.seed).map_err(config_err)?;
    Ok((trellis, profile))
}

pub fn decode(args: &RunArgs) -> Result<(), Failure> {
    let mut p: Prepared<DecodeConfig> = prepare(args)?;
    let cfg = &p.cfg;
    let sigma2 = match (cfg.sigma2, cfg.ebn0_db) {
        (Some(_), Some(_)) => {
            return Err(Failure::Config(
                "give either sigma2 or ebn0_db, not both".into(),
            ))
        }
        (None, None) => {
            return Err(Failure::Config(
                "one of sigma2 or ebn0_db is required".into(),
            ))
        }
        (Some(s), None) => {
            if s <= 0.0 || !s.is_finite() {
                return Err(Failure::Config(format!(
                    "sigma2 must be positive and finite, got {s}"
                )));
            }
            s
        }
        (None, Some(_)) => f64::NAN, // resolved against the rate below
    };

    cfg.system.hash_inputs(&p.base, &mut p.hash)?;
    let input_path = resolve(&p.base, &cfg.input);
    p.hash.input_file(&input_path)?;
    let config_hash = p.hash.finish();

    let system = cfg.system.assemble(&p.base, cfg.seed)?;
    let sigma2 = if sigma2.is_nan() {
        snr_to_sigma2(cfg.ebn0_db.expect("checked above"), system.rate())
            .map_err(config_err)?
    } else {
        sigma2
    };

    let y = read_symbol_csv(&input_path, system.block_len(), system.streams())?;
    let out = system.decode(&y, sigma2).map_err(runtime_err)?;

    let mut text = String::from("position,llr,bit\n");
    for (i, &llr) in out.input_llrs.iter().enumerate() {
        let bit = u8::from(llr < 0.0);
        text.push_str(&format!("{i},{llr},{bit}\n"));
    }
    p.out.write("decoded.csv", text.as_bytes())?;
    println!(
        "decoded {} positions at sigma2 = {sigma2} -> decoded.csv (config {config_hash})",
        out.input_llrs.len()
    );
    Ok(())
}

/// Reads a `rows x cols` float matrix with no header.
fn read_symbol_csv(path: &Path, rows: usize, cols: usize) -> Result<Tensor64, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0usize;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Failure::Config(format!(
                "{}:{}: expected {cols} columns, found {}",
                path.display(),
                ln + 1,
                fields.len()
            )));
        }
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|e| {
                Failure::Config(format!("{}:{}: {e}", path.display(), ln + 1))
            })?;
            data.push(v);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Failure::Config(format!(
            "{}: expected {rows} rows of symbols, found {seen}",
            path.display()
        )));
    }
    Tensor64::from_vec(data, rows, cols).map_err(config_err)
}

pub fn simulate(args: &RunArgs, emit_plotdata: bool) -> Result<(), Failure> {
    let mut p: Prepared<SimulateConfig> = prepare(args)?;
    let cfg = &p.cfg;
    cfg.validate()?;
    if let SimSystem::Coded { system } = &cfg.system {
        system.hash_inputs(&p.base, &mut p.hash)?;
    }
    let config_hash = p.hash.finish();

    let system: Box<dyn BlockSystem> = match &cfg.system {
        SimSystem::Coded { system } => Box::new(system.assemble(&p.base, cfg.seed)?),
        SimSystem::UncodedBpsk { block_len } => {
            if *block_len == 0 {
                return Err(Failure::Config("block_len must be positive".into()));
            }
            Box::new(UncodedBpsk { k: *block_len })
        }
        SimSystem::RepetitionPair { block_len } => {
            if *block_len == 0 {
                return Err(Failure::Config("block_len must be positive".into()));
            }
            Box::new(RepetitionPair { k: *block_len })
        }
    };

    let report = run_monte_carlo(
        system.as_ref(),
        &cfg.ebn0_db,
        &cfg.stop.to_rule(),
        cfg.seed,
        config_hash.clone(),
    )
    .map_err(runtime_err)?;

    write_report(&p.out, &report, emit_plotdata)?;
    for pt in &report.points {
        println!(
            "ebn0 {:>6.2} dB: ber {:.3e}, bler {:.3e} ({} blocks, {} block errors)",
            pt.ebn0_db, pt.ber, pt.bler, pt.blocks, pt.block_errors
        );
    }
    println!(
        "wrote report.csv{} (rate {:.4}, config {config_hash})",
        if emit_plotdata { " and plotdata.dat" } else { "" },
        report.rate
    );
    Ok(())
}

fn write_report(out: &OutDir, report: &SimReport, emit_plotdata: bool) -> Result<(), Failure> {
    let file = File::create(out.path("report.csv")).map_err(runtime_err)?;
    let mut w = BufWriter::new(file);
    write_report_csv(&mut w, report).map_err(runtime_err)?;
    w.flush().map_err(runtime_err)?;
    if emit_plotdata {
        let file = File::create(out.path("plotdata.dat")).map_err(runtime_err)?;
        let mut w = BufWriter::new(file);
        write_plotdata(&mut w, report).map_err(runtime_err)?;
        w.flush().map_err(runtime_err)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ValidationReport {
    bce: f64,
    bler: f64,
    blocks: usize,
}

impl From<&Validation> for ValidationReport {
    fn from(v: &Validation) -> Self {
        ValidationReport {
            bce: v.bce,
            bler: v.bler,
            blocks: v.blocks,
        }
    }
}

#[derive(Serialize)]
struct TrainSummary {
    config_hash: String,
    seed: u64,
    updates: usize,
    snr_db: f64,
    before: ValidationReport,
    after: ValidationReport,
    final_table_version: u64,
    weight_files: Vec<String>,
}

/// Whether a training command expects its modulators to come from files
/// (fine-tuning) or from fresh random draws (training from scratch).
pub enum TrainKind {
    Finetune,
    FromScratch,
}

pub fn train(args: &RunArgs, kind: TrainKind) -> Result<(), Failure> {
    let mut p: Prepared<TrainCommandConfig> = prepare(args)?;
    let cfg = &p.cfg;
    for (i, spec) in cfg.system.inner.iter().enumerate() {
        match (&kind, spec) {
            (TrainKind::Finetune, InnerSpec::Random { .. }) => {
                return Err(Failure::Config(format!(
                    "finetune expects stream {i} to load weights from a file; \
                     use train-inner for random initialization"
                )))
            }
            (TrainKind::FromScratch, InnerSpec::File { .. }) => {
                return Err(Failure::Config(format!(
                    "train-inner expects stream {i} to start from random weights; \
                     use finetune to continue from a file"
                )))
            }
            _ => {}
        }
    }
    cfg.system.hash_inputs(&p.base, &mut p.hash)?;
    let config_hash = p.hash.finish();

    let train_cfg = cfg.train.to_config(cfg.seed);
    train_cfg.validate().map_err(config_err)?;
    let mut system = cfg.system.assemble(&p.base, cfg.seed)?;

    let report = match train_modulators(&mut system, &train_cfg) {
        Ok(r) => r,
        Err(Error::Diverged(msg)) => {
            return Err(Failure::Runtime(format!("training diverged: {msg}")))
        }
        Err(e) => return Err(runtime_err(e)),
    };

    let file = File::create(p.out.path("loss.csv")).map_err(runtime_err)?;
    let mut w = BufWriter::new(file);
    write_loss_csv(&mut w, &report).map_err(runtime_err)?;
    w.flush().map_err(runtime_err)?;

    let mut weight_files = Vec::new();
    for (s, model) in system.inner_models().iter().enumerate() {
        let name = format!("weights_stream{s}.json");
        save_weights(model, &p.out.path(&name)).map_err(runtime_err)?;
        weight_files.push(name);
    }

    let summary = TrainSummary {
        config_hash: config_hash.clone(),
        seed: cfg.seed,
        updates: report.loss_history.len(),
        snr_db: cfg.train.snr_db,
        before: (&report.before).into(),
        after: (&report.after).into(),
        final_table_version: system.table_version(),
        weight_files,
    };
    p.out.write_json("summary.json", &summary)?;
    println!(
        "{} updates at {} dB: validation bce {:.5} -> {:.5}, bler {:.4} -> {:.4} (config {config_hash})",
        summary.updates,
        summary.snr_db,
        summary.before.bce,
        summary.after.bce,
        summary.before.bler,
        summary.after.bler
    );
    Ok(())
}

pub fn gen_weights(args: &RunArgs) -> Result<(), Failure> {
    let p: Prepared<GenWeightsConfig> = prepare(args)?;
    let cfg = &p.cfg;
    if cfg.count == 0 {
        return Err(Failure::Config("count must be positive".into()));
    }
    let config_hash = p.hash.finish();
    let mut files = Vec::new();
    for i in 0..cfg.count {
        let model = CnnModel::<f64>::random(
            cfg.in_depth,
            cfg.hidden_depth,
            cfg.out_depth,
            cfg.layers,
            cfg.kernel_size,
            cfg.seed + i as u64,
        )
        .map_err(config_err)?;
        let name = format!("weights_{i}.json");
        save_weights(&model, &p.out.path(&name)).map_err(runtime_err)?;
        files.push(name);
    }
    println!(
        "wrote {} weight file(s): {} (config {config_hash})",
        files.len(),
        files.join(", ")
    );
    Ok(())
}
