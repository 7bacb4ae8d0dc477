//! The assembled link: outer polynomial code, interleaver, per-stream
//! convolutional-network modulators, power normalization, AWGN, and the
//! serial turbo decoder, packaged as one simulatable and trainable system.
//!
//! Assembly does the bookkeeping that keeps transmitter and receiver
//! consistent:
//!
//! * each modulator is profiled ([`flip_energy`] → [`estimate_memory`],
//!   optionally trimmed to a memory budget) and compiled to a trellis;
//! * the transmit side normalizes every block to unit average power, so the
//!   trellis tables are rescaled by a calibrated average gain — the decoder
//!   sees symbols at the amplitude the channel actually carries, up to the
//!   per-block fluctuation of the normalizer (which shrinks as `1/sqrt(2kF)`);
//! * the decoder's noise variance is injected per call, so one system serves
//!   a whole SNR sweep.
//!
//! For training, [`CodedSystem::transmit_traced`] and
//! [`CodedSystem::transmit_backward`] expose the differentiable transmit
//! path (loss → channel symbols → normalizer → network weights), and
//! [`CodedSystem::refresh_tables`] re-derives the decoder tables from the
//! live weights without changing the trellis shape.

use crate::analysis::{
    estimate_memory, flip_energy, trim_to_budget, EnergyProfile, FlipMode, MemoryProfile,
    EXACT_WINDOW_CAP,
};
use crate::bcjr::{BcjrConfig, MaxStarMode, WrapMode};
use crate::cnn::{CnnEncoder, CnnGrads, CnnModel, ForwardTrace};
use crate::codes::{
    normalize_power, normalize_power_backward, spc_correct, spc_encode, spc_rate_shift_db,
    BipolarBlock, BlockEncoder, Interleaver, PolynomialBank,
};
use crate::sim::{awgn, BlockOutcome, BlockSystem};
use crate::tensor::Tensor;
use crate::trellis::{AveragingMode, Trellis};
use crate::turbo::{OuterStage, TurboConfig, TurboDecoder, TurboGrads, TurboOutput};
use crate::{Error, Result, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Assembly-time choices. Defaults follow the six-iteration exact-log
/// receiver; everything a sweep or training run might vary is here.
#[derive(Debug, Clone)]
pub struct LinkOptions {
    /// Turbo iterations per decode.
    pub iterations: usize,
    /// Exact log-domain sums or the max-only approximation.
    pub mode: MaxStarMode,
    /// Boundary handling for both stages; `None` picks a circular extension
    /// of `2m + 2` positions per stage (capped at a quarter block).
    pub wrap: Option<WrapMode>,
    /// Extrinsic scaling override; `None` keeps the mode's default.
    pub damping: Option<f64>,
    /// Normalized flip-energy threshold defining each contributing window.
    pub threshold: f64,
    /// Cap on each modulator's trellis memory; the estimated window is
    /// trimmed from its weaker end until it fits.
    pub memory_budget: Option<usize>,
    /// Sample count for flip profiles too wide to enumerate.
    pub flip_samples: usize,
    /// Random blocks used to calibrate the average transmit gain.
    pub calibration_blocks: usize,
    /// Append a parity bit to each message and flip the least reliable
    /// decision when parity fails.
    pub spc: bool,
    /// Seed for calibration and table averaging (not for channel noise).
    pub seed: u64,
}

impl Default for LinkOptions {
    fn default() -> Self {
        LinkOptions {
            iterations: 6,
            mode: MaxStarMode::LogMap,
            wrap: None,
            damping: None,
            threshold: crate::analysis::DEFAULT_THRESHOLD,
            memory_budget: None,
            flip_samples: 4096,
            calibration_blocks: 64,
            spc: false,
            seed: 0,
        }
    }
}

/// Everything recorded while transmitting one block, enough to pull a
/// gradient at the channel symbols back to the modulator weights.
#[derive(Debug, Clone)]
pub struct TxTrace<S> {
    /// Coded bits before interleaving, `k x F`.
    pub coded: Tensor<S>,
    /// Coded bits after interleaving.
    pub permuted: Tensor<S>,
    /// Stacked modulator outputs before normalization.
    pub raw: Tensor<S>,
    /// Per-stream network activations.
    pub traces: Vec<ForwardTrace<S>>,
    /// The transmitted block (unit average power).
    pub sent: Tensor<S>,
}

/// A serially concatenated code with trained modulators and its matched
/// turbo decoder. Immutable during decoding and simulation; training
/// mutates the weights and then [`CodedSystem::refresh_tables`].
#[derive(Debug, Clone)]
pub struct CodedSystem<S> {
    outer: PolynomialBank,
    interleaver: Interleaver,
    inner: Vec<CnnModel<S>>,
    energies: Vec<EnergyProfile<S>>,
    profiles: Vec<MemoryProfile>,
    inner_trellises: Vec<Trellis<S>>,
    outer_trellis: Trellis<S>,
    decoder: TurboDecoder<S>,
    turbo: TurboConfig,
    tx_scale: S,
    spc: bool,
    calibration_blocks: usize,
    seed: u64,
}

fn default_wrap(memory: usize, block_len: usize) -> WrapMode {
    let steps = (2 * memory + 2).min((block_len / 4).max(1));
    WrapMode::Wrap { steps }
}

fn modulate<S: Scalar>(
    outer: &PolynomialBank,
    interleaver: &Interleaver,
    inner: &[CnnModel<S>],
    u: &Tensor<S>,
) -> Result<Tensor<S>> {
    let c = outer.encode_block(u)?;
    let cpi = interleaver.interleave(&c)?;
    let mut x = Tensor::zeros(interleaver.len(), inner.len());
    for (s, model) in inner.iter().enumerate() {
        let xs = model.forward(&Tensor::from_column(cpi.column(s)))?;
        x.set_column(s, &xs.column(0));
    }
    Ok(x)
}

/// Mean output power over seeded random blocks; the reciprocal of its root
/// is the average gain the per-block normalizer applies.
fn mean_raw_power<S: Scalar>(
    outer: &PolynomialBank,
    interleaver: &Interleaver,
    inner: &[CnnModel<S>],
    blocks: usize,
    seed: u64,
) -> Result<f64> {
    let k = interleaver.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0f64;
    for _ in 0..blocks {
        let u = BipolarBlock::<S>::random(k, 1, &mut rng);
        acc += modulate(outer, interleaver, inner, u.tensor())?
            .mean_square()
            .to64();
    }
    let ms = acc / blocks as f64;
    if ms <= 0.0 || !ms.is_finite() {
        return Err(Error::Degenerate(
            "modulators produce (near-)zero power; cannot calibrate".into(),
        ));
    }
    Ok(ms)
}

impl<S: Scalar> CodedSystem<S> {
    /// Profiles and compiles the modulators, calibrates the transmit gain,
    /// and wires up the decoder. The block length is the interleaver's.
    pub fn assemble(
        outer: PolynomialBank,
        interleaver: Interleaver,
        inner: Vec<CnnModel<S>>,
        opts: &LinkOptions,
    ) -> Result<Self> {
        let k = interleaver.len();
        let streams = outer.streams().len();
        if inner.len() != streams {
            return Err(Error::invalid(format!(
                "outer code produces {streams} streams but {} modulators were given",
                inner.len()
            )));
        }
        for (s, model) in inner.iter().enumerate() {
            if model.in_depth() != 1 || model.out_depth() != 1 {
                return Err(Error::invalid(format!(
                    "modulator {s} must map one stream to one stream, got {} -> {}",
                    model.in_depth(),
                    model.out_depth()
                )));
            }
            if model.receptive_field() > k {
                return Err(Error::invalid(format!(
                    "modulator {s} has receptive field {} wider than the block length {k}",
                    model.receptive_field()
                )));
            }
        }
        if opts.spc && k < 2 {
            return Err(Error::invalid("parity extension needs at least two positions"));
        }
        if !(opts.threshold > 0.0 && opts.threshold < 1.0) {
            return Err(Error::invalid(format!(
                "contribution threshold must lie in (0, 1), got {}",
                opts.threshold
            )));
        }

        let mut energies = Vec::with_capacity(streams);
        let mut profiles = Vec::with_capacity(streams);
        for model in &inner {
            let enc = CnnEncoder::new(model.clone(), false);
            let mode = if enc.window_width() <= EXACT_WINDOW_CAP {
                FlipMode::Exact
            } else {
                FlipMode::Sampled {
                    count: opts.flip_samples,
                    seed: opts.seed,
                }
            };
            let energy = flip_energy(&enc, 0, mode)?;
            let mut profile = estimate_memory(&energy, opts.threshold);
            if let Some(budget) = opts.memory_budget {
                profile = trim_to_budget(&energy, &profile, budget)?;
            }
            energies.push(energy);
            profiles.push(profile);
        }

        let outer_trellis = Trellis::from_encoder_exact(&outer)?;
        let turbo = Self::schedule(opts, &profiles, outer_trellis.memory(), k);

        let calibration_blocks = opts.calibration_blocks.max(1);
        let ms = mean_raw_power(&outer, &interleaver, &inner, calibration_blocks, opts.seed)?;
        let tx_scale = S::of(1.0 / ms.sqrt());
        let mut inner_trellises = Vec::with_capacity(streams);
        for (model, profile) in inner.iter().zip(&profiles) {
            let enc = CnnEncoder::new(model.clone(), false);
            let mut t = Trellis::from_profile(&enc, profile, AveragingMode::Auto, opts.seed)?;
            t.scale_outputs(tx_scale);
            inner_trellises.push(t);
        }
        let decoder = TurboDecoder::new(
            inner_trellises.clone(),
            OuterStage::Joint(outer_trellis.clone()),
            interleaver.clone(),
        )?;

        Ok(CodedSystem {
            outer,
            interleaver,
            inner,
            energies,
            profiles,
            inner_trellises,
            outer_trellis,
            decoder,
            turbo,
            tx_scale,
            spc: opts.spc,
            calibration_blocks,
            seed: opts.seed,
        })
    }

    fn schedule(
        opts: &LinkOptions,
        profiles: &[MemoryProfile],
        outer_memory: usize,
        k: usize,
    ) -> TurboConfig {
        let inner_memory = profiles.iter().map(MemoryProfile::memory).max().unwrap_or(0);
        let wrap_inner = opts.wrap.unwrap_or_else(|| default_wrap(inner_memory, k));
        let wrap_outer = opts.wrap.unwrap_or_else(|| default_wrap(outer_memory, k));
        let mut inner_cfg = BcjrConfig::new(opts.mode, wrap_inner, 1.0);
        let mut outer_cfg = BcjrConfig::new(opts.mode, wrap_outer, 1.0);
        if let Some(d) = opts.damping {
            inner_cfg.damping = d;
            outer_cfg.damping = d;
        }
        TurboConfig::new(opts.iterations, inner_cfg, outer_cfg)
    }

    fn rebuild(&mut self) -> Result<()> {
        self.decoder = TurboDecoder::new(
            self.inner_trellises.clone(),
            OuterStage::Joint(self.outer_trellis.clone()),
            self.interleaver.clone(),
        )?;
        Ok(())
    }

    /// Positions per block.
    pub fn block_len(&self) -> usize {
        self.interleaver.len()
    }

    /// Coded streams (equals channel uses per position).
    pub fn streams(&self) -> usize {
        self.outer.streams().len()
    }

    pub fn spc(&self) -> bool {
        self.spc
    }

    /// Calibrated average transmit gain folded into the decoder tables.
    pub fn tx_scale(&self) -> S {
        self.tx_scale
    }

    pub fn decoder(&self) -> &TurboDecoder<S> {
        &self.decoder
    }

    pub fn profiles(&self) -> &[MemoryProfile] {
        &self.profiles
    }

    pub fn energies(&self) -> &[EnergyProfile<S>] {
        &self.energies
    }

    pub fn inner_models(&self) -> &[CnnModel<S>] {
        &self.inner
    }

    pub fn outer_code(&self) -> &PolynomialBank {
        &self.outer
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    /// Lowest rebuild count across the inner tables; starts at 0 and rises
    /// by one per [`CodedSystem::refresh_tables`].
    pub fn table_version(&self) -> u64 {
        self.inner_trellises
            .iter()
            .map(Trellis::version)
            .min()
            .unwrap_or(0)
    }

    /// The decode schedule with the noise variance filled in.
    pub fn turbo_config(&self, sigma2: f64) -> TurboConfig {
        let mut cfg = self.turbo.clone();
        cfg.inner.sigma2 = sigma2;
        cfg
    }

    /// Replaces one modulator's weights. The decoder tables keep their old
    /// contents until [`CodedSystem::refresh_tables`]; training loops batch
    /// several updates per refresh and account for the staleness.
    pub fn set_inner_params(&mut self, stream: usize, params: &[S]) -> Result<()> {
        let model = self
            .inner
            .get_mut(stream)
            .ok_or_else(|| Error::invalid(format!("no modulator stream {stream}")))?;
        model.set_params(params)
    }

    /// Re-derives the transmit gain and every inner table from the current
    /// weights. The contributing windows stay frozen (the trellis shape
    /// cannot drift mid-training); table version counters advance.
    pub fn refresh_tables(&mut self) -> Result<()> {
        let ms = mean_raw_power(
            &self.outer,
            &self.interleaver,
            &self.inner,
            self.calibration_blocks,
            self.seed,
        )?;
        self.tx_scale = S::of(1.0 / ms.sqrt());
        for (s, model) in self.inner.iter().enumerate() {
            let enc = CnnEncoder::new(model.clone(), false);
            self.inner_trellises[s].refresh_from(
                &enc,
                &self.profiles[s],
                AveragingMode::Auto,
                self.seed,
            )?;
            self.inner_trellises[s].scale_outputs(self.tx_scale);
        }
        self.rebuild()
    }

    fn raw_transmit(&self, u: &Tensor<S>) -> Result<Tensor<S>> {
        modulate(&self.outer, &self.interleaver, &self.inner, u)
    }

    /// Encodes, modulates, and normalizes one message block.
    pub fn transmit(&self, u: &BipolarBlock<S>) -> Result<Tensor<S>> {
        normalize_power(&self.raw_transmit(u.tensor())?)
    }

    /// [`CodedSystem::transmit`] with every intermediate kept for the
    /// backward pass.
    pub fn transmit_traced(&self, u: &BipolarBlock<S>) -> Result<TxTrace<S>> {
        let coded = self.outer.encode_block(u.tensor())?;
        let permuted = self.interleaver.interleave(&coded)?;
        let k = self.block_len();
        let mut raw = Tensor::zeros(k, self.streams());
        let mut traces = Vec::with_capacity(self.streams());
        for (s, model) in self.inner.iter().enumerate() {
            let trace = model.forward_trace(&Tensor::from_column(permuted.column(s)))?;
            raw.set_column(s, &trace.output().column(0));
            traces.push(trace);
        }
        let sent = normalize_power(&raw)?;
        Ok(TxTrace {
            coded,
            permuted,
            raw,
            traces,
            sent,
        })
    }

    /// Pulls a gradient in the transmitted symbols back through the
    /// normalizer and each modulator, yielding per-stream weight gradients.
    /// Nothing flows past the coded bits — they are discrete and the outer
    /// code has no trainable parameters.
    pub fn transmit_backward(
        &self,
        trace: &TxTrace<S>,
        d_sent: &Tensor<S>,
    ) -> Result<Vec<CnnGrads<S>>> {
        let d_raw = normalize_power_backward(&trace.raw, d_sent)?;
        let mut grads = Vec::with_capacity(self.streams());
        for (s, model) in self.inner.iter().enumerate() {
            let upstream = Tensor::from_column(d_raw.column(s));
            let (g, _) = model.backward(&trace.traces[s], &upstream);
            grads.push(g);
        }
        Ok(grads)
    }

    /// Runs the turbo decoder on one observed block.
    pub fn decode(&self, y: &Tensor<S>, sigma2: f64) -> Result<TurboOutput<S>> {
        self.decoder.decode(&self.turbo_config(sigma2), y)
    }

    /// Adjoint of [`CodedSystem::decode`] for a gradient in the message
    /// beliefs; see [`TurboDecoder::decode_backward`].
    pub fn decode_backward(
        &self,
        y: &Tensor<S>,
        sigma2: f64,
        upstream: &[S],
    ) -> Result<TurboGrads<S>> {
        self.decoder
            .decode_backward(&self.turbo_config(sigma2), y, upstream)
    }
}

impl<S: Scalar> BlockSystem for CodedSystem<S> {
    fn message_bits(&self) -> usize {
        self.block_len()
    }

    fn channel_uses(&self) -> usize {
        self.block_len() * self.streams()
    }

    fn rate_shift_db(&self) -> f64 {
        if self.spc {
            spc_rate_shift_db(self.block_len()).expect("block length validated at assembly")
        } else {
            0.0
        }
    }

    fn run_block(
        &self,
        sigma2: f64,
        message_rng: &mut ChaCha8Rng,
        noise_rng: &mut ChaCha8Rng,
    ) -> Result<BlockOutcome> {
        let k = self.block_len();
        let u = if self.spc {
            spc_encode(&BipolarBlock::random(k - 1, 1, message_rng))?
        } else {
            BipolarBlock::random(k, 1, message_rng)
        };
        let x = self.transmit(&u)?;
        let y = awgn(&x, sigma2, noise_rng)?;
        let out = self.decode(&y, sigma2)?;
        let raw = BipolarBlock::hard_decide(&out.input_llrs);
        let raw_errors = raw.count_diff(&u);
        if self.spc {
            let corrected = spc_correct(&out.input_llrs)?;
            Ok(BlockOutcome {
                bit_errors: corrected.count_diff(&u),
                raw_bit_errors: Some(raw_errors),
            })
        } else {
            Ok(BlockOutcome::clean(raw_errors))
        }
    }
}
