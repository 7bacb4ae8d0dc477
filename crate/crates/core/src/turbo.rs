//! Iterative decoder for a serial concatenation of two soft-decodable
//! codes joined by a position interleaver.
//!
//! One round trip looks like this: every inner stream decoder reads its
//! slice of the channel observations together with a priori beliefs about
//! its own input bits, and emits extrinsic information about those bits.
//! The per-stream extrinsics are stacked, deinterleaved, and handed to the
//! outer decoder as coded-bit a priori input. The outer decoder produces
//! posteriors on the uncoded message — the decoder output — plus coded-bit
//! extrinsics, which travel back through the interleaver and become the
//! inner a priori for the next round. The first round starts from zero
//! a priori.
//!
//! Feedback hygiene rests on the component decoders: what each one sends
//! onward never contains what it was just told (see the a-priori-only
//! invariant tests in [`crate::bcjr`]), so beliefs do not echo.
//!
//! The outer code may be decoded on one joint trellis covering all coded
//! streams (the reference), or per stream with the message posteriors
//! summed as if the streams were independent observations — cheaper, since
//! two small state spaces replace one product space.
//!
//! A memoryless inner stream needs no special path: its one-state trellis
//! reduces the sweep to the per-bit channel LLR added onto the a priori,
//! which is exactly what the general recursion computes.
//!
//! Everything here is a pure function of its inputs, so whole decodes
//! parallelize across blocks; within one block the iterations are a data
//! dependency chain. The unrolled chain is differentiable:
//! [`TurboDecoder::decode_backward`] replays it in reverse, chaining the
//! component adjoints and the permutation adjoints.

use crate::bcjr::{
    self, BcjrConfig, BcjrInput, BcjrOutput, BcjrUpstream, LlrRequest, WrapMode,
};
use crate::codes::Interleaver;
use crate::tensor::Tensor;
use crate::trellis::Trellis;
use crate::{Error, Result, Scalar};
use std::io::Write;

/// Iteration schedule and per-stage decoder settings.
///
/// The iteration count is fixed, never adaptive: runs with equal
/// configuration produce identical traces, which keeps convergence
/// comparisons honest.
#[derive(Debug, Clone)]
pub struct TurboConfig {
    pub iterations: usize,
    /// Settings for the inner (channel-facing) decoders.
    pub inner: BcjrConfig,
    /// Settings for the outer decoder(s).
    pub outer: BcjrConfig,
}

impl TurboConfig {
    pub fn new(iterations: usize, inner: BcjrConfig, outer: BcjrConfig) -> Self {
        TurboConfig {
            iterations,
            inner,
            outer,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("turbo decoding needs at least 1 iteration"));
        }
        Ok(())
    }
}

/// How the outer code is decoded.
#[derive(Debug, Clone)]
pub enum OuterStage<S> {
    /// One trellis whose output depth equals the number of coded streams.
    Joint(Trellis<S>),
    /// One single-output trellis per coded stream; message beliefs are
    /// aggregated by summation (independent-observation approximation).
    PerStream(Vec<Trellis<S>>),
}

impl<S: Scalar> OuterStage<S> {
    fn streams(&self) -> usize {
        match self {
            OuterStage::Joint(t) => t.depth(),
            OuterStage::PerStream(ts) => ts.len(),
        }
    }
}

/// Health snapshot of one decoding iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Mean magnitude of the message posteriors — a confidence proxy.
    pub mean_abs_llr: f64,
    /// Hard decisions that changed since the previous iteration (0 for the
    /// first).
    pub sign_flips: usize,
}

/// Decoder output: message beliefs plus the per-iteration trace.
#[derive(Debug, Clone)]
pub struct TurboOutput<S> {
    /// Posterior LLRs on the uncoded message, positive meaning +1.
    pub input_llrs: Vec<S>,
    pub trace: Vec<IterationTrace>,
}

/// Gradients of a scalar loss through the unrolled iteration chain.
#[derive(Debug, Clone)]
pub struct TurboGrads<S> {
    /// With respect to the channel observations, matching `y`.
    pub channel: Tensor<S>,
    /// With respect to each inner stream's symbol table.
    pub inner_symbols: Vec<Tensor<S>>,
}

/// Serial two-stage iterative decoder.
///
/// `inner[s]` soft-decodes coded stream `s` from its slice of the
/// observation columns; the outer stage ties the streams back to the
/// message. All trellises must describe tail-biting blocks of one common
/// length, fixed by the interleaver.
#[derive(Debug, Clone)]
pub struct TurboDecoder<S> {
    inner: Vec<Trellis<S>>,
    outer: OuterStage<S>,
    interleaver: Interleaver,
}

impl<S: Scalar> TurboDecoder<S> {
    pub fn new(
        inner: Vec<Trellis<S>>,
        outer: OuterStage<S>,
        interleaver: Interleaver,
    ) -> Result<Self> {
        if inner.is_empty() {
            return Err(Error::invalid("turbo decoder needs at least one inner stream"));
        }
        if outer.streams() != inner.len() {
            return Err(Error::invalid(format!(
                "outer stage covers {} coded streams but there are {} inner decoders",
                outer.streams(),
                inner.len()
            )));
        }
        let bipolar = match &outer {
            OuterStage::Joint(t) => t.bipolar(),
            OuterStage::PerStream(ts) => {
                if let Some(bad) = ts.iter().find(|t| t.depth() != 1) {
                    return Err(Error::invalid(format!(
                        "per-stream outer trellises must have one output each, found depth {}",
                        bad.depth()
                    )));
                }
                ts.iter().all(|t| t.bipolar())
            }
        };
        if !bipolar {
            return Err(Error::invalid(
                "outer trellis outputs must be bipolar so coded-bit beliefs are well-defined",
            ));
        }
        Ok(TurboDecoder {
            inner,
            outer,
            interleaver,
        })
    }

    pub fn inner(&self) -> &[Trellis<S>] {
        &self.inner
    }

    pub fn outer(&self) -> &OuterStage<S> {
        &self.outer
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    /// Observation columns belonging to inner stream `s`.
    fn obs_offset(&self, s: usize) -> usize {
        self.inner[..s].iter().map(|t| t.depth()).sum()
    }

    fn obs_depth(&self) -> usize {
        self.inner.iter().map(|t| t.depth()).sum()
    }

    fn check_shapes(&self, cfg: &TurboConfig, y: &Tensor<S>) -> Result<usize> {
        cfg.validate()?;
        let n = y.positions();
        if n != self.interleaver.len() {
            return Err(Error::invalid(format!(
                "block length {n} does not match interleaver length {}",
                self.interleaver.len()
            )));
        }
        if y.depth() != self.obs_depth() {
            return Err(Error::invalid(format!(
                "observation depth {} does not match the {} inner output streams",
                y.depth(),
                self.obs_depth()
            )));
        }
        Ok(n)
    }

    /// Splits `y` into per-stream observation tensors.
    fn split_observations(&self, y: &Tensor<S>) -> Vec<Tensor<S>> {
        let n = y.positions();
        self.inner
            .iter()
            .enumerate()
            .map(|(s, t)| {
                let off = self.obs_offset(s);
                Tensor::from_fn(n, t.depth(), |p, d| y.at(p, off + d))
            })
            .collect()
    }

    /// Inner stage: soft-decode every stream against its observations and
    /// a priori column, returning stacked input extrinsics (and the raw
    /// component outputs when requested by the adjoint).
    fn inner_pass(
        &self,
        cfg: &TurboConfig,
        ys: &[Tensor<S>],
        apriori: &Tensor<S>,
    ) -> Result<Tensor<S>> {
        let n = apriori.positions();
        let mut extrinsic = Tensor::zeros(n, self.inner.len());
        for (s, trellis) in self.inner.iter().enumerate() {
            let la = apriori.column(s);
            let input = BcjrInput {
                channel: Some(&ys[s]),
                coded_apriori: None,
                input_apriori: Some(&la),
            };
            let out = bcjr::decode(trellis, &cfg.inner, &input, LlrRequest::INPUT)?;
            extrinsic.set_column(s, &out.input_extrinsic.expect("requested input beliefs"));
        }
        Ok(extrinsic)
    }

    /// Outer stage on deinterleaved coded beliefs: message posteriors plus
    /// coded extrinsics for the feedback path.
    fn outer_pass(&self, cfg: &TurboConfig, coded: &Tensor<S>) -> Result<(Vec<S>, Tensor<S>)> {
        let n = coded.positions();
        match &self.outer {
            OuterStage::Joint(trellis) => {
                let input = BcjrInput::coded_only(coded);
                let out = bcjr::decode(trellis, &cfg.outer, &input, LlrRequest::BOTH)?;
                Ok((
                    out.input_posterior.expect("requested input beliefs"),
                    out.coded_extrinsic.expect("requested coded beliefs"),
                ))
            }
            OuterStage::PerStream(ts) => {
                let mut message = vec![S::zero(); n];
                let mut extrinsic = Tensor::zeros(n, ts.len());
                for (s, trellis) in ts.iter().enumerate() {
                    let column = Tensor::from_column(coded.column(s));
                    let input = BcjrInput::coded_only(&column);
                    let out = bcjr::decode(trellis, &cfg.outer, &input, LlrRequest::BOTH)?;
                    let post = out.input_posterior.expect("requested input beliefs");
                    for (acc, l) in message.iter_mut().zip(&post) {
                        *acc += *l;
                    }
                    extrinsic
                        .set_column(s, out.coded_extrinsic.expect("requested coded beliefs").column(0).as_slice());
                }
                Ok((message, extrinsic))
            }
        }
    }

    /// Runs the full iteration schedule on one block of observations.
    pub fn decode(&self, cfg: &TurboConfig, y: &Tensor<S>) -> Result<TurboOutput<S>> {
        let n = self.check_shapes(cfg, y)?;
        let ys = self.split_observations(y);
        let streams = self.inner.len();

        let mut apriori = Tensor::zeros(n, streams);
        let mut message: Vec<S> = Vec::new();
        let mut prev_hard: Option<Vec<bool>> = None;
        let mut trace = Vec::with_capacity(cfg.iterations);
        for it in 0..cfg.iterations {
            let extrinsic = self.inner_pass(cfg, &ys, &apriori)?;
            let coded = self.interleaver.deinterleave(&extrinsic)?;
            let (msg, feedback) = self.outer_pass(cfg, &coded)?;
            apriori = self.interleaver.interleave(&feedback)?;

            let hard: Vec<bool> = msg.iter().map(|&l| l >= S::zero()).collect();
            let flips = prev_hard
                .as_ref()
                .map(|p| p.iter().zip(&hard).filter(|(a, b)| a != b).count())
                .unwrap_or(0);
            let mean = msg.iter().map(|&l| l.abs().to64()).sum::<f64>() / n as f64;
            trace.push(IterationTrace {
                iteration: it + 1,
                mean_abs_llr: mean,
                sign_flips: flips,
            });
            prev_hard = Some(hard);
            message = msg;
        }
        Ok(TurboOutput {
            input_llrs: message,
            trace,
        })
    }

    /// Reverse-mode adjoint of [`TurboDecoder::decode`] for a loss that
    /// depends on the final message posteriors through `upstream`.
    ///
    /// The forward chain is replayed storing only the small per-iteration
    /// interface tensors; each component decode is then recomputed with its
    /// sweep state just in time, and its adjoint called in reverse order.
    /// Interleaving is a permutation, so its adjoint is the inverse
    /// permutation. Requires wrap-mode sweeps on both stages (the anchored
    /// decoder has no adjoint).
    pub fn decode_backward(
        &self,
        cfg: &TurboConfig,
        y: &Tensor<S>,
        upstream: &[S],
    ) -> Result<TurboGrads<S>> {
        let n = self.check_shapes(cfg, y)?;
        if upstream.len() != n {
            return Err(Error::invalid("upstream length mismatch"));
        }
        if matches!(cfg.inner.wrap, WrapMode::Anchored)
            || matches!(cfg.outer.wrap, WrapMode::Anchored)
        {
            return Err(Error::invalid(
                "the anchored decoder has no adjoint; use wrap mode for gradients",
            ));
        }
        let ys = self.split_observations(y);
        let streams = self.inner.len();

        // Forward replay, keeping the inner a priori at the start of every
        // iteration. Everything else is recomputed on the way back.
        let mut aprioris = Vec::with_capacity(cfg.iterations);
        let mut apriori = Tensor::zeros(n, streams);
        for _ in 0..cfg.iterations {
            aprioris.push(apriori.clone());
            let extrinsic = self.inner_pass(cfg, &ys, &apriori)?;
            let coded = self.interleaver.deinterleave(&extrinsic)?;
            let (_, feedback) = self.outer_pass(cfg, &coded)?;
            apriori = self.interleaver.interleave(&feedback)?;
        }

        let mut d_y = Tensor::zeros(n, y.depth());
        let mut d_symbols: Vec<Tensor<S>> = self
            .inner
            .iter()
            .map(|t| Tensor::zeros(t.num_transitions(), t.depth()))
            .collect();
        // Gradient on the outer coded extrinsic of the iteration being
        // unwound; None in the last iteration (its feedback is unused).
        let mut d_feedback: Option<Tensor<S>> = None;

        for it in (0..cfg.iterations).rev() {
            let last = it + 1 == cfg.iterations;
            let apriori = &aprioris[it];

            // Recompute the inner stage of this iteration.
            let mut inner_runs = Vec::with_capacity(streams);
            let mut extrinsic = Tensor::zeros(n, streams);
            for (s, trellis) in self.inner.iter().enumerate() {
                let la = apriori.column(s);
                let run = InnerRun::decode(trellis, &cfg.inner, &ys[s], la)?;
                extrinsic.set_column(s, &run.extrinsic);
                inner_runs.push(run);
            }
            let coded = self.interleaver.deinterleave(&extrinsic)?;

            // Outer adjoint: message upstream only in the last iteration,
            // feedback upstream only before it.
            let d_message: Option<&[S]> = last.then_some(upstream);
            let d_coded =
                self.outer_backward(cfg, &coded, d_message, d_feedback.as_ref())?;
            let d_extrinsic = self.interleaver.interleave(&d_coded)?;

            // Inner adjoints: fold the extrinsic gradient into channel,
            // symbol-table, and a priori gradients per stream.
            let mut d_apriori = Tensor::zeros(n, streams);
            for (s, run) in inner_runs.iter().enumerate() {
                let de = d_extrinsic.column(s);
                let up = BcjrUpstream {
                    input_extrinsic: Some(&de),
                    ..BcjrUpstream::default()
                };
                let input = BcjrInput {
                    channel: Some(&ys[s]),
                    coded_apriori: None,
                    input_apriori: Some(&run.la),
                };
                let grads =
                    bcjr::decode_backward(&self.inner[s], &cfg.inner, &input, &run.state, &up)?;
                let gy = grads.channel.expect("channel gradient present");
                let off = self.obs_offset(s);
                for p in 0..n {
                    for d in 0..self.inner[s].depth() {
                        *d_y.at_mut(p, off + d) += gy.at(p, d);
                    }
                }
                for (acc, g) in d_symbols[s]
                    .data_mut()
                    .iter_mut()
                    .zip(grads.symbols.data())
                {
                    *acc += *g;
                }
                d_apriori.set_column(s, &grads.input_apriori.expect("a priori gradient present"));
            }

            // The a priori of this iteration is the interleaved feedback of
            // the previous one; the first iteration starts from constants.
            d_feedback = (it > 0).then(|| self.interleaver.deinterleave(&d_apriori)).transpose()?;
        }

        Ok(TurboGrads {
            channel: d_y,
            inner_symbols: d_symbols,
        })
    }

    /// Adjoint of [`TurboDecoder::outer_pass`]: gradient w.r.t. the
    /// deinterleaved coded beliefs.
    fn outer_backward(
        &self,
        cfg: &TurboConfig,
        coded: &Tensor<S>,
        d_message: Option<&[S]>,
        d_feedback: Option<&Tensor<S>>,
    ) -> Result<Tensor<S>> {
        let n = coded.positions();
        match &self.outer {
            OuterStage::Joint(trellis) => {
                let input = BcjrInput::coded_only(coded);
                let (_, state) =
                    bcjr::decode_with_state(trellis, &cfg.outer, &input, LlrRequest::BOTH)?;
                let up = BcjrUpstream {
                    input_posterior: d_message,
                    coded_extrinsic: d_feedback,
                    ..BcjrUpstream::default()
                };
                let grads = bcjr::decode_backward(trellis, &cfg.outer, &input, &state, &up)?;
                Ok(grads.coded_apriori.expect("coded gradient present"))
            }
            OuterStage::PerStream(ts) => {
                // Summation in the forward pass broadcasts the message
                // gradient to every stream decoder unchanged.
                let mut d_coded = Tensor::zeros(n, ts.len());
                for (s, trellis) in ts.iter().enumerate() {
                    let column = Tensor::from_column(coded.column(s));
                    let input = BcjrInput::coded_only(&column);
                    let (_, state) =
                        bcjr::decode_with_state(trellis, &cfg.outer, &input, LlrRequest::BOTH)?;
                    let df = d_feedback.map(|t| Tensor::from_column(t.column(s)));
                    let up = BcjrUpstream {
                        input_posterior: d_message,
                        coded_extrinsic: df.as_ref(),
                        ..BcjrUpstream::default()
                    };
                    let grads = bcjr::decode_backward(trellis, &cfg.outer, &input, &state, &up)?;
                    d_coded.set_column(
                        s,
                        &grads.coded_apriori.expect("coded gradient present").column(0),
                    );
                }
                Ok(d_coded)
            }
        }
    }
}

/// One inner component decode kept around for its adjoint.
struct InnerRun<S> {
    la: Vec<S>,
    extrinsic: Vec<S>,
    state: bcjr::BcjrState<S>,
}

impl<S: Scalar> InnerRun<S> {
    fn decode(
        trellis: &Trellis<S>,
        cfg: &BcjrConfig,
        y: &Tensor<S>,
        la: Vec<S>,
    ) -> Result<Self> {
        let input = BcjrInput {
            channel: Some(y),
            coded_apriori: None,
            input_apriori: Some(&la),
        };
        let (out, state): (BcjrOutput<S>, _) =
            bcjr::decode_with_state(trellis, cfg, &input, LlrRequest::INPUT)?;
        Ok(InnerRun {
            extrinsic: out.input_extrinsic.expect("requested input beliefs"),
            la,
            state,
        })
    }
}

/// Writes the per-iteration trace as CSV (`iteration,mean_abs_llr,sign_flips`).
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[IterationTrace]) -> std::io::Result<()> {
    writeln!(w, "iteration,mean_abs_llr,sign_flips")?;
    for row in trace {
        writeln!(w, "{},{},{}", row.iteration, row.mean_abs_llr, row.sign_flips)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bcjr::MaxStarMode;
    use crate::codes::{BipolarBlock, BlockEncoder, PolynomialBank, PolynomialEncoder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Memoryless unit-energy modulation: bit 0 -> +1, bit 1 -> -1.
    fn bpsk_trellis() -> Trellis<f64> {
        Trellis::from_table(Tensor::from_vec(vec![1.0, -1.0], 2, 1).unwrap(), 0, true).unwrap()
    }

    fn product_trellis(taps: &[isize]) -> Trellis<f64> {
        let enc = PolynomialEncoder::new(taps.to_vec()).unwrap();
        Trellis::<f64>::from_encoder_exact(&enc).unwrap()
    }

    /// Random real-valued trellis table for adjoint tests.
    fn random_trellis(memory: u32, depth: usize, delta: isize, seed: u64) -> Trellis<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = 1usize << (memory + 1);
        let table = Tensor::from_fn(rows, depth, |_, _| rng.gen_range(-1.3..1.3));
        Trellis::from_table(table, delta, false).unwrap()
    }

    /// Random bipolar (sign) trellis table.
    fn random_sign_trellis(memory: u32, depth: usize, seed: u64) -> Trellis<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = 1usize << (memory + 1);
        let table = Tensor::from_fn(rows, depth, |_, _| {
            if rng.gen_bool(0.5) {
                1.0
            } else {
                -1.0
            }
        });
        Trellis::from_table(table, 0, true).unwrap()
    }

    /// Small two-stream chain: outer bank, interleaver, then stream 0 as
    /// plain modulation and stream 1 through a generic real-valued mapping
    /// with memory. The second inner stage being non-bipolar matters: a
    /// generic table has no sign symmetry, so it contributes information
    /// from the first iteration, and its extrinsic genuinely depends on the
    /// fed-back a priori, which is what makes iterating worthwhile.
    struct Chain {
        outer: PolynomialBank,
        interleaver: Interleaver,
        decoder: TurboDecoder<f64>,
    }

    fn chain(k: usize, joint: bool) -> Chain {
        let outer = PolynomialBank::new(vec![
            PolynomialEncoder::new(vec![0, 1]).unwrap(),
            PolynomialEncoder::new(vec![-1, 0, 1]).unwrap(),
        ])
        .unwrap();
        let interleaver = Interleaver::linear_default(k).unwrap();
        let inner = vec![bpsk_trellis(), random_trellis(2, 1, 1, 4242)];
        let stage = if joint {
            OuterStage::Joint(Trellis::<f64>::from_encoder_exact(&outer).unwrap())
        } else {
            OuterStage::PerStream(vec![
                product_trellis(&[0, 1]),
                product_trellis(&[-1, 0, 1]),
            ])
        };
        let decoder = TurboDecoder::new(inner, stage, interleaver.clone()).unwrap();
        Chain {
            outer,
            interleaver,
            decoder,
        }
    }

    /// Encodes a message through the chain the decoder of `chain` expects.
    fn transmit(chain: &Chain, u: &BipolarBlock<f64>) -> Tensor<f64> {
        let c = chain.outer.encode_block(u.tensor()).unwrap();
        let c_pi = chain.interleaver.interleave(&c).unwrap();
        let c1 = BipolarBlock::new(Tensor::from_column(c_pi.column(1))).unwrap();
        let x1 = chain.decoder.inner()[1].encode_block(&c1).unwrap();
        Tensor::from_fn(u.tensor().positions(), 2, |p, d| {
            if d == 0 {
                c_pi.at(p, 0)
            } else {
                x1.at(p, 0)
            }
        })
    }

    fn config(iterations: usize, sigma2: f64) -> TurboConfig {
        TurboConfig::new(
            iterations,
            BcjrConfig::new(MaxStarMode::LogMap, WrapMode::Wrap { steps: 4 }, sigma2),
            BcjrConfig::new(MaxStarMode::LogMap, WrapMode::Wrap { steps: 4 }, 1.0),
        )
    }

    #[test]
    fn clean_observations_decode_to_the_message() {
        let k = 16;
        let ch = chain(k, true);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let u = BipolarBlock::<f64>::random(k, 1, &mut rng);
            let y = transmit(&ch, &u);
            let out = ch.decoder.decode(&config(2, 0.05), &y).unwrap();
            for q in 0..k {
                assert!(
                    (out.input_llrs[q] > 0.0) == (u.at(q, 0) > 0.0),
                    "clean block misdecoded at {q}"
                );
            }
        }
    }

    #[test]
    fn single_iteration_equals_component_composition() {
        let k = 12;
        let outer = PolynomialBank::new(vec![
            PolynomialEncoder::new(vec![0, 1]).unwrap(),
            PolynomialEncoder::new(vec![-1, 0, 1]).unwrap(),
        ])
        .unwrap();
        let outer_trellis = Trellis::<f64>::from_encoder_exact(&outer).unwrap();
        let inner = vec![bpsk_trellis(), product_trellis(&[0, 1])];
        let decoder = TurboDecoder::new(
            inner.clone(),
            OuterStage::Joint(outer_trellis.clone()),
            Interleaver::identity(k).unwrap(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = Tensor::from_fn(k, 2, |_, _| rng.gen_range(-2.0..2.0));
        let cfg = config(1, 0.7);
        let turbo = decoder.decode(&cfg, &y).unwrap();

        // By hand: each inner stream with zero a priori, stack extrinsics,
        // then one outer decode.
        let mut stacked = Tensor::zeros(k, 2);
        for (s, t) in inner.iter().enumerate() {
            let ys = Tensor::from_column(y.column(s));
            let la = vec![0.0; k];
            let input = BcjrInput {
                channel: Some(&ys),
                coded_apriori: None,
                input_apriori: Some(&la),
            };
            let out = bcjr::decode(t, &cfg.inner, &input, LlrRequest::INPUT).unwrap();
            stacked.set_column(s, &out.input_extrinsic.unwrap());
        }
        let input = BcjrInput::coded_only(&stacked);
        let by_hand = bcjr::decode(&outer_trellis, &cfg.outer, &input, LlrRequest::INPUT)
            .unwrap()
            .input_posterior
            .unwrap();
        assert_eq!(turbo.input_llrs, by_hand);
    }

    /// The split outer stage needs the exact tail-biting sweep: open-chain
    /// sweeps leave a lone product stream's message beliefs pinned at zero
    /// by its sign-flip symmetry (see the single-stream test in
    /// [`crate::bcjr`]), and closing the ring is what breaks the tie.
    #[test]
    fn joint_and_per_stream_outers_agree_on_clean_blocks() {
        let k = 16;
        let joint = chain(k, true);
        let split = chain(k, false);
        let mut split_cfg = config(3, 0.05);
        split_cfg.outer = BcjrConfig::new(MaxStarMode::LogMap, WrapMode::Anchored, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let u = BipolarBlock::<f64>::random(k, 1, &mut rng);
            let y = transmit(&joint, &u);
            let a = joint.decoder.decode(&config(3, 0.05), &y).unwrap();
            let b = split.decoder.decode(&split_cfg, &y).unwrap();
            for q in 0..k {
                assert_eq!(a.input_llrs[q] > 0.0, u.at(q, 0) > 0.0, "joint missed {q}");
                assert_eq!(b.input_llrs[q] > 0.0, u.at(q, 0) > 0.0, "split missed {q}");
            }
        }
    }

    #[test]
    fn trace_is_deterministic_and_counts_iterations() {
        let k = 16;
        let ch = chain(k, true);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = BipolarBlock::<f64>::random(k, 1, &mut rng);
        let clean = transmit(&ch, &u);
        let y = Tensor::from_fn(k, 2, |p, d| {
            clean.at(p, d) + 0.6 * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let a = ch.decoder.decode(&config(4, 0.36), &y).unwrap();
        let b = ch.decoder.decode(&config(4, 0.36), &y).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.trace.len(), 4);
        assert_eq!(a.trace[0].iteration, 1);
        assert_eq!(a.trace[0].sign_flips, 0);
        assert!(a.trace.iter().all(|t| t.mean_abs_llr.is_finite()));

        let mut csv = Vec::new();
        write_trace_csv(&mut csv, &a.trace).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("iteration,mean_abs_llr,sign_flips\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn shape_and_config_errors() {
        let k = 12;
        let ch = chain(k, true);
        let y = Tensor::<f64>::zeros(k, 2);
        assert!(ch.decoder.decode(&config(0, 0.5), &y).is_err());
        let bad = Tensor::<f64>::zeros(k, 3);
        assert!(ch.decoder.decode(&config(1, 0.5), &bad).is_err());
        let short = Tensor::<f64>::zeros(k - 1, 2);
        assert!(ch.decoder.decode(&config(1, 0.5), &short).is_err());

        // Constructor-level mismatches.
        let outer = OuterStage::Joint(random_sign_trellis(1, 1, 3));
        assert!(TurboDecoder::new(
            vec![bpsk_trellis(), bpsk_trellis()],
            outer,
            Interleaver::identity(k).unwrap(),
        )
        .is_err());
        let real_outer = OuterStage::Joint(random_trellis(1, 2, 0, 4));
        assert!(TurboDecoder::new(
            vec![bpsk_trellis(), bpsk_trellis()],
            real_outer,
            Interleaver::identity(k).unwrap(),
        )
        .is_err());
    }

    /// Central finite differences over every observation entry and a few
    /// symbol-table entries of a two-iteration unrolled decode.
    #[test]
    fn adjoint_matches_finite_differences_over_two_iterations() {
        let k = 8;
        let interleaver = Interleaver::random(k, 21).unwrap();
        let inner = vec![random_trellis(2, 1, 1, 100), random_trellis(2, 1, 0, 101)];
        let outer = OuterStage::Joint(random_sign_trellis(2, 2, 102));
        let decoder = TurboDecoder::new(inner, outer, interleaver).unwrap();
        let cfg = TurboConfig::new(
            2,
            BcjrConfig::new(MaxStarMode::LogMap, WrapMode::Wrap { steps: 3 }, 0.8),
            BcjrConfig::new(MaxStarMode::LogMap, WrapMode::Wrap { steps: 3 }, 1.0),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let y = Tensor::from_fn(k, 2, |_, _| rng.gen_range(-1.5..1.5));
        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let loss = |dec: &TurboDecoder<f64>, y: &Tensor<f64>| -> f64 {
            let out = dec.decode(&cfg, y).unwrap();
            out.input_llrs
                .iter()
                .zip(&weights)
                .map(|(l, w)| l * w)
                .sum()
        };

        let grads = decoder.decode_backward(&cfg, &y, &weights).unwrap();
        let h = 1e-5;
        for p in 0..k {
            for d in 0..2 {
                let mut plus = y.clone();
                *plus.at_mut(p, d) += h;
                let mut minus = y.clone();
                *minus.at_mut(p, d) -= h;
                let fd = (loss(&decoder, &plus) - loss(&decoder, &minus)) / (2.0 * h);
                let an = grads.channel.at(p, d);
                assert!(
                    (fd - an).abs() <= 1e-4 * fd.abs().max(1.0),
                    "d y[{p},{d}]: finite difference {fd} vs adjoint {an}"
                );
            }
        }

        // Symbol-table entries of both inner streams.
        for s in 0..2 {
            for row in [0usize, 3, 5] {
                let perturbed = |eps: f64| {
                    let t = &decoder.inner()[s];
                    let mut table = t.outputs().clone();
                    *table.at_mut(row, 0) += eps;
                    let mut inner: Vec<Trellis<f64>> = decoder.inner().to_vec();
                    inner[s] = Trellis::from_table(table, t.delta(), false).unwrap();
                    TurboDecoder::new(
                        inner,
                        decoder.outer().clone(),
                        decoder.interleaver().clone(),
                    )
                    .unwrap()
                };
                let fd = (loss(&perturbed(h), &y) - loss(&perturbed(-h), &y)) / (2.0 * h);
                let an = grads.inner_symbols[s].at(row, 0);
                assert!(
                    (fd - an).abs() <= 1e-4 * fd.abs().max(1.0),
                    "d table[{s}][{row}]: finite difference {fd} vs adjoint {an}"
                );
            }
        }
    }

    /// Same check with the per-stream outer stage and one iteration.
    #[test]
    fn per_stream_adjoint_matches_finite_differences() {
        let k = 8;
        let interleaver = Interleaver::random(k, 5).unwrap();
        let inner = vec![random_trellis(2, 1, 0, 200), random_trellis(1, 1, 1, 201)];
        let outer = OuterStage::PerStream(vec![
            product_trellis(&[0, 1]),
            product_trellis(&[-1, 0, 1]),
        ]);
        let decoder = TurboDecoder::new(inner, outer, interleaver).unwrap();
        let cfg = TurboConfig::new(
            2,
            BcjrConfig::new(MaxStarMode::LogMap, WrapMode::Wrap { steps: 3 }, 0.6),
            BcjrConfig::new(MaxStarMode::LogMap, WrapMode::Wrap { steps: 3 }, 1.0),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        let y = Tensor::from_fn(k, 2, |_, _| rng.gen_range(-1.5..1.5));
        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |y: &Tensor<f64>| -> f64 {
            let out = decoder.decode(&cfg, y).unwrap();
            out.input_llrs
                .iter()
                .zip(&weights)
                .map(|(l, w)| l * w)
                .sum()
        };
        let grads = decoder.decode_backward(&cfg, &y, &weights).unwrap();
        let h = 1e-5;
        for p in 0..k {
            for d in 0..2 {
                let mut plus = y.clone();
                *plus.at_mut(p, d) += h;
                let mut minus = y.clone();
                *minus.at_mut(p, d) -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let an = grads.channel.at(p, d);
                assert!(
                    (fd - an).abs() <= 1e-4 * fd.abs().max(1.0),
                    "d y[{p},{d}]: finite difference {fd} vs adjoint {an}"
                );
            }
        }
    }

    /// Shifting the interleaver offset while rotating the observations the
    /// same amount presents the outer stage with identical beliefs, as long
    /// as the inner stages are position-local. The message output must then
    /// match exactly, and the observation gradient must be the rotation of
    /// the original — gradients commute with the permutation plumbing.
    #[test]
    fn gradients_commute_with_interleaver_rotation() {
        let k = 8;
        let r = 3; // offset shift and observation rotation
        let inner = || vec![random_trellis(0, 1, 0, 400), random_trellis(0, 1, 0, 401)];
        let outer = || OuterStage::Joint(random_sign_trellis(2, 2, 402));
        let base = TurboDecoder::new(
            inner(),
            outer(),
            Interleaver::linear(k, 3, 1).unwrap(),
        )
        .unwrap();
        let shifted = TurboDecoder::new(
            inner(),
            outer(),
            Interleaver::linear(k, 3, 1 + r).unwrap(),
        )
        .unwrap();
        let cfg = TurboConfig::new(
            2,
            BcjrConfig::new(MaxStarMode::LogMap, WrapMode::Wrap { steps: 3 }, 0.9),
            BcjrConfig::new(MaxStarMode::LogMap, WrapMode::Wrap { steps: 3 }, 1.0),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let y = Tensor::from_fn(k, 2, |_, _| rng.gen_range(-1.5..1.5));
        let rotated = Tensor::from_fn(k, 2, |p, d| y.at((p + k - r) % k, d));

        let a = base.decode(&cfg, &y).unwrap().input_llrs;
        let b = shifted.decode(&cfg, &rotated).unwrap().input_llrs;
        for q in 0..k {
            assert!(
                (a[q] - b[q]).abs() < 1e-9,
                "message beliefs differ at {q}: {} vs {}",
                a[q],
                b[q]
            );
        }

        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = base.decode_backward(&cfg, &y, &weights).unwrap();
        let gr = shifted.decode_backward(&cfg, &rotated, &weights).unwrap();
        for p in 0..k {
            for d in 0..2 {
                assert!(
                    (gr.channel.at((p + r) % k, d) - g.channel.at(p, d)).abs() < 1e-9,
                    "gradient does not commute with the rotation at {p},{d}"
                );
            }
        }
        for s in 0..2 {
            assert!(g.inner_symbols[s].max_abs_diff(&gr.inner_symbols[s]) < 1e-9);
        }
    }

    #[test]
    fn anchored_stages_refuse_gradients() {
        let k = 8;
        let ch = chain(k, true);
        let mut cfg = config(1, 0.5);
        cfg.inner.wrap = WrapMode::Anchored;
        let y = Tensor::<f64>::zeros(k, 2);
        let up = vec![0.0; k];
        assert!(ch.decoder.decode_backward(&cfg, &y, &up).is_err());
    }

    /// On blocks that decode correctly, confidence should generally grow
    /// with iterations; this is telemetry, so the test only checks that the
    /// trend holds on a clear majority of noisy blocks.
    #[test]
    fn confidence_mostly_grows_over_iterations() {
        let k = 24;
        let ch = chain(k, true);
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let sigma2: f64 = 0.25;
        let mut grew = 0;
        let total = 20;
        for _ in 0..total {
            let u = BipolarBlock::<f64>::random(k, 1, &mut rng);
            let clean = transmit(&ch, &u);
            let y = Tensor::from_fn(k, 2, |p, d| {
                clean.at(p, d) + sigma2.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            let out = ch.decoder.decode(&config(4, sigma2), &y).unwrap();
            let t = &out.trace;
            if t[t.len() - 1].mean_abs_llr > t[0].mean_abs_llr {
                grew += 1;
            }
        }
        assert!(grew * 10 >= total * 7, "confidence grew on only {grew}/{total} blocks");
    }
}
