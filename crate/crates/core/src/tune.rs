//! Gradient training of the modulators against the decoder they will be
//! decoded with.
//!
//! Each update samples a batch of message blocks, runs them through the
//! live transmit chain and the unrolled turbo decoder at the training SNR,
//! and pulls the binary cross-entropy back through the decoder adjoint to
//! the channel symbols and from there into the network weights. Noise is
//! sampled independently of the weights, so the chain rule through
//! `y = x + n` is exact.
//!
//! The decoder's symbol tables are a function of the weights, but within a
//! step they are held fixed — the gradient flows only through the
//! transmitted symbols. The tables are re-derived from the live weights
//! every `refresh_period` updates instead, and the per-update table version
//! is recorded so staleness is visible in the report rather than silent.
//!
//! Everything is deterministic given the seed: batch items draw from
//! counter-based RNG streams, and batch gradients are reduced in index
//! order even though the items themselves run in parallel.

use crate::codes::BipolarBlock;
use crate::sim::{awgn, stream_rng, BlockSystem};
use crate::system::CodedSystem;
use crate::{Error, Result, Scalar};
use rayon::prelude::*;
use std::io::Write;

/// RNG stream domains (disjoint from the simulator's).
const TRAIN_MESSAGE_DOMAIN: u64 = 5;
const TRAIN_NOISE_DOMAIN: u64 = 6;
const VAL_MESSAGE_DOMAIN: u64 = 7;
const VAL_NOISE_DOMAIN: u64 = 8;

/// Abort once the loss has exceeded 10x its initial value this many
/// updates in a row.
const DIVERGENCE_PATIENCE: usize = 50;
const DIVERGENCE_FACTOR: f64 = 10.0;

/// First-moment / second-moment / step-size settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
    Sgd {
        lr: f64,
    },
}

impl Optimizer {
    /// Adam with the usual moment constants.
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Optimizer::Sgd { lr }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            Optimizer::Adam { lr, .. } | Optimizer::Sgd { lr } => lr,
        }
    }
}

/// One training run's hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Blocks per gradient estimate.
    pub batch: usize,
    pub optimizer: Optimizer,
    /// Training Eb/N0 in dB (converted through the system's rate).
    pub snr_db: f64,
    /// Turbo iterations unrolled during training (may be fewer than the
    /// system's inference schedule).
    pub iterations: usize,
    /// Optimizer steps to run.
    pub updates: usize,
    pub seed: u64,
    /// Re-derive the decoder tables every this many updates; 1 keeps them
    /// exact, larger values trade staleness for speed.
    pub refresh_period: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.updates == 0 {
            return Err(Error::invalid("training needs at least one update"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("training needs at least one decoder iteration"));
        }
        let lr = self.optimizer.learning_rate();
        if !lr.is_finite() || lr < 0.0 {
            return Err(Error::invalid("learning rate must be finite and non-negative"));
        }
        if self.refresh_period == 0 {
            return Err(Error::invalid("refresh period must be at least 1"));
        }
        Ok(())
    }
}

/// Binary cross-entropy between soft beliefs and the sent bits, averaged
/// over positions: `mean_i -log sigmoid(L_i * u_i)` with `u` bipolar.
pub fn bce_loss<S: Scalar>(llrs: &[S], u: &BipolarBlock<S>) -> Result<f64> {
    check_bce_shapes(llrs, u)?;
    let sum: f64 = llrs
        .iter()
        .zip(u.tensor().data())
        .map(|(&l, &b)| softplus(-(l * b).to64()))
        .sum();
    Ok(sum / llrs.len() as f64)
}

/// Gradient of [`bce_loss`] in the beliefs:
/// `d/dL_i = -u_i * sigmoid(-L_i u_i) / n`.
pub fn bce_backward<S: Scalar>(llrs: &[S], u: &BipolarBlock<S>) -> Result<Vec<S>> {
    check_bce_shapes(llrs, u)?;
    let n = llrs.len() as f64;
    Ok(llrs
        .iter()
        .zip(u.tensor().data())
        .map(|(&l, &b)| {
            let z = (l * b).to64();
            S::of(-b.to64() * sigmoid(-z) / n)
        })
        .collect())
}

fn check_bce_shapes<S: Scalar>(llrs: &[S], u: &BipolarBlock<S>) -> Result<()> {
    if u.depth() != 1 || u.positions() != llrs.len() {
        return Err(Error::invalid(format!(
            "loss compares {} beliefs against a {}x{} message",
            llrs.len(),
            u.positions(),
            u.depth()
        )));
    }
    Ok(())
}

/// `ln(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Validation statistics at one SNR, deterministic in the seed so runs
/// before and after training see identical messages and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    pub bce: f64,
    pub bler: f64,
    pub blocks: usize,
}

/// Decodes `blocks` seeded random blocks at `snr_db` and reports mean BCE
/// and the block error rate. `iterations` overrides the system's schedule.
pub fn validate_link<S: Scalar>(
    system: &CodedSystem<S>,
    iterations: usize,
    snr_db: f64,
    blocks: usize,
    seed: u64,
) -> Result<Validation> {
    if blocks == 0 {
        return Err(Error::invalid("validation needs at least one block"));
    }
    let sigma2 = crate::sim::snr_to_sigma2(snr_db, system.rate())?;
    let mut cfg = system.turbo_config(sigma2);
    cfg.iterations = iterations;
    let k = system.block_len();
    let results: Result<Vec<(f64, bool)>> = (0..blocks as u64)
        .into_par_iter()
        .map(|b| {
            let mut mrng = stream_rng(seed, VAL_MESSAGE_DOMAIN, b);
            let mut nrng = stream_rng(seed, VAL_NOISE_DOMAIN, b);
            let u = BipolarBlock::<S>::random(k, 1, &mut mrng);
            let y = awgn(&system.transmit(&u)?, sigma2, &mut nrng)?;
            let out = system.decoder().decode(&cfg, &y)?;
            let loss = bce_loss(&out.input_llrs, &u)?;
            let errs = BipolarBlock::hard_decide(&out.input_llrs).count_diff(&u);
            Ok((loss, errs > 0))
        })
        .collect();
    let results = results?;
    let bce = results.iter().map(|r| r.0).sum::<f64>() / blocks as f64;
    let errors = results.iter().filter(|r| r.1).count();
    Ok(Validation {
        bce,
        bler: errors as f64 / blocks as f64,
        blocks,
    })
}

/// What a training run produced, beyond the updated weights in the system.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Batch loss per update, before that update's step.
    pub loss_history: Vec<f64>,
    /// Decoder table version in effect at each update; staleness relative
    /// to the weights is bounded by the refresh period.
    pub table_versions: Vec<u64>,
    /// Link quality at the training SNR before the first update.
    pub before: Validation,
    /// Same measurement (same seeded blocks) after the last update.
    pub after: Validation,
}

/// `update,loss,table_version` rows for the loss curve.
pub fn write_loss_csv<W: Write>(mut w: W, report: &TrainReport) -> std::io::Result<()> {
    writeln!(w, "update,loss,table_version")?;
    for (i, (loss, ver)) in report
        .loss_history
        .iter()
        .zip(&report.table_versions)
        .enumerate()
    {
        writeln!(w, "{},{},{}", i + 1, loss, ver)?;
    }
    Ok(())
}

struct GradAccumulator<S> {
    per_stream: Vec<Vec<S>>,
    loss: f64,
}

/// Optimizer state over the flattened parameter vector.
struct OptState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

impl OptState {
    fn new(n: usize) -> Self {
        OptState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, opt: &Optimizer, params: &mut [f64], grad: &[f64]) {
        match *opt {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                self.t += 1;
                let bc1 = 1.0 - beta1.powi(self.t as i32);
                let bc2 = 1.0 - beta2.powi(self.t as i32);
                for i in 0..params.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    let mhat = self.m[i] / bc1;
                    let vhat = self.v[i] / bc2;
                    params[i] -= lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
    }
}

/// One batch: parallel forward/adjoint over the items, reduced in index
/// order. Returns the mean loss and the summed per-stream weight gradients.
fn batch_pass<S: Scalar>(
    system: &CodedSystem<S>,
    cfg: &TrainConfig,
    sigma2: f64,
    update: usize,
) -> Result<GradAccumulator<S>> {
    let k = system.block_len();
    let mut turbo_cfg = system.turbo_config(sigma2);
    turbo_cfg.iterations = cfg.iterations;
    let items: Result<Vec<(f64, Vec<Vec<S>>)>> = (0..cfg.batch)
        .into_par_iter()
        .map(|b| {
            let idx = (update * cfg.batch + b) as u64;
            let mut mrng = stream_rng(cfg.seed, TRAIN_MESSAGE_DOMAIN, idx);
            let mut nrng = stream_rng(cfg.seed, TRAIN_NOISE_DOMAIN, idx);
            let u = BipolarBlock::<S>::random(k, 1, &mut mrng);
            let trace = system.transmit_traced(&u)?;
            let y = awgn(&trace.sent, sigma2, &mut nrng)?;
            let out = system.decoder().decode(&turbo_cfg, &y)?;
            let loss = bce_loss(&out.input_llrs, &u)?;
            let upstream = bce_backward(&out.input_llrs, &u)?;
            let dec_grads = system
                .decoder()
                .decode_backward(&turbo_cfg, &y, &upstream)?;
            // d(loss)/d(sent) = d(loss)/d(y): the noise is additive.
            let wgrads = system.transmit_backward(&trace, &dec_grads.channel)?;
            Ok((loss, wgrads.iter().map(|g| g.flatten()).collect()))
        })
        .collect();
    let items = items?;
    let streams = system.streams();
    let mut acc = GradAccumulator {
        per_stream: (0..streams)
            .map(|s| vec![S::zero(); system.inner_models()[s].num_params()])
            .collect(),
        loss: 0.0,
    };
    for (loss, grads) in &items {
        acc.loss += loss;
        for (sum, item) in acc.per_stream.iter_mut().zip(grads) {
            for (a, &g) in sum.iter_mut().zip(item) {
                *a += g;
            }
        }
    }
    acc.loss /= cfg.batch as f64;
    let scale = S::of(1.0 / cfg.batch as f64);
    for sum in &mut acc.per_stream {
        for g in sum.iter_mut() {
            *g *= scale;
        }
    }
    Ok(acc)
}

/// Runs the training loop on the system's modulators in place.
///
/// Works the same whether the weights start from a trained model
/// (fine-tuning against a smaller decoder) or from random initialization
/// (learning the modulators from scratch); the caller chooses by how it
/// assembles the system. On success the system holds the updated weights
/// and freshly re-derived tables.
pub fn train_modulators<S: Scalar>(
    system: &mut CodedSystem<S>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let sigma2 = crate::sim::snr_to_sigma2(cfg.snr_db, system.rate())?;
    let val_blocks = cfg.batch.clamp(64, 512);
    let before = validate_link(system, cfg.iterations, cfg.snr_db, val_blocks, cfg.seed)?;

    let streams = system.streams();
    let sizes: Vec<usize> = (0..streams)
        .map(|s| system.inner_models()[s].num_params())
        .collect();
    let total: usize = sizes.iter().sum();
    let mut state = OptState::new(total);
    let mut params: Vec<f64> = (0..streams)
        .flat_map(|s| {
            system.inner_models()[s]
                .flatten_params()
                .into_iter()
                .map(|p| p.to64())
        })
        .collect();

    let mut loss_history = Vec::with_capacity(cfg.updates);
    let mut table_versions = Vec::with_capacity(cfg.updates);
    let mut over_budget = 0usize;
    for update in 0..cfg.updates {
        table_versions.push(system.table_version());
        let acc = match batch_pass(system, cfg, sigma2, update) {
            Ok(acc) => acc,
            // The pre-training validation already pushed blocks through the
            // link, so once an optimizer step has been taken the only way
            // the forward pass can go non-finite is exploding weights.
            Err(Error::Degenerate(msg)) if update > 0 => {
                return Err(Error::Diverged(format!(
                    "update {update} produced non-finite values ({msg})"
                )));
            }
            Err(e) => return Err(e),
        };
        loss_history.push(acc.loss);
        let baseline = loss_history[0];
        if !acc.loss.is_finite() || acc.loss > DIVERGENCE_FACTOR * baseline {
            over_budget += 1;
            if over_budget >= DIVERGENCE_PATIENCE {
                return Err(Error::Diverged(format!(
                    "loss {:.4} stayed above {DIVERGENCE_FACTOR}x the initial {:.4} for \
                     {DIVERGENCE_PATIENCE} consecutive updates",
                    acc.loss, baseline
                )));
            }
        } else {
            over_budget = 0;
        }

        let grad: Vec<f64> = acc
            .per_stream
            .iter()
            .flat_map(|g| g.iter().map(|v| v.to64()))
            .collect();
        state.step(&cfg.optimizer, &mut params, &grad);
        let mut off = 0;
        for (s, &len) in sizes.iter().enumerate() {
            let slice: Vec<S> = params[off..off + len].iter().map(|&p| S::of(p)).collect();
            system.set_inner_params(s, &slice)?;
            off += len;
        }
        if (update + 1) % cfg.refresh_period == 0 || update + 1 == cfg.updates {
            system.refresh_tables()?;
        }
    }

    let after = validate_link(system, cfg.iterations, cfg.snr_db, val_blocks, cfg.seed)?;
    Ok(TrainReport {
        loss_history,
        table_versions,
        before,
        after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::CnnModel;
    use crate::codes::{Interleaver, PolynomialBank, PolynomialEncoder};
    use crate::system::LinkOptions;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn outer_bank() -> PolynomialBank {
        PolynomialBank::new(vec![
            PolynomialEncoder::new(vec![-2, 0, 1]).unwrap(),
            PolynomialEncoder::new(vec![-1, 0, 3]).unwrap(),
        ])
        .unwrap()
    }

    fn desk_system(k: usize, seed: u64) -> CodedSystem<f64> {
        let inner = vec![
            CnnModel::random(1, 4, 1, 2, 3, seed).unwrap(),
            CnnModel::random(1, 4, 1, 2, 3, seed + 1).unwrap(),
        ];
        CodedSystem::assemble(
            outer_bank(),
            Interleaver::linear_default(k).unwrap(),
            inner,
            &LinkOptions::default(),
        )
        .unwrap()
    }

    fn quick_cfg(updates: usize) -> TrainConfig {
        TrainConfig {
            batch: 8,
            optimizer: Optimizer::sgd(1e-3),
            snr_db: 2.0,
            iterations: 2,
            updates,
            seed: 77,
            refresh_period: 1,
        }
    }

    #[test]
    fn bce_reference_values() {
        let u = BipolarBlock::from_bits(&[0, 1, 0, 1]).unwrap();
        // Zero beliefs: ln 2 regardless of the message.
        let zero = vec![0.0f64; 4];
        assert_relative_eq!(bce_loss(&zero, &u).unwrap(), (2.0f64).ln(), epsilon = 1e-15);
        // Confident and correct: loss goes to zero.
        let right: Vec<f64> = u.tensor().data().iter().map(|&b| 40.0 * b).collect();
        assert!(bce_loss(&right, &u).unwrap() < 1e-15);
        // Confident and wrong: loss is the magnitude, per position.
        let wrong: Vec<f64> = u.tensor().data().iter().map(|&b| -30.0 * b).collect();
        assert_relative_eq!(bce_loss(&wrong, &u).unwrap(), 30.0, epsilon = 1e-9);
        // Shape mismatch.
        assert!(bce_loss(&zero[..3], &u).is_err());
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = BipolarBlock::<f64>::random(9, 1, &mut rng);
        let llrs: Vec<f64> = (0..9).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let grad = bce_backward(&llrs, &u).unwrap();
        let h = 1e-6;
        for j in 0..9 {
            let mut lp = llrs.clone();
            lp[j] += h;
            let mut lm = llrs.clone();
            lm[j] -= h;
            let fd = (bce_loss(&lp, &u).unwrap() - bce_loss(&lm, &u).unwrap()) / (2.0 * h);
            assert_relative_eq!(grad[j], fd, max_relative = 1e-6, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        // Each update draws a fresh batch, so the per-update losses still
        // vary; what zero step size must leave untouched are the weights,
        // the paired validation, and (by determinism) the history itself.
        for opt in [Optimizer::sgd(0.0), Optimizer::adam(0.0)] {
            let mut sys = desk_system(16, 31);
            let params_before: Vec<Vec<f64>> = (0..sys.streams())
                .map(|s| sys.inner_models()[s].flatten_params())
                .collect();
            let mut cfg = quick_cfg(3);
            cfg.optimizer = opt;
            let report = train_modulators(&mut sys, &cfg).unwrap();
            for (s, before) in params_before.iter().enumerate() {
                assert_eq!(&sys.inner_models()[s].flatten_params(), before);
            }
            assert_eq!(report.before, report.after);

            let mut again = desk_system(16, 31);
            let rerun = train_modulators(&mut again, &cfg).unwrap();
            assert_eq!(report.loss_history, rerun.loss_history);
        }
    }

    #[test]
    fn training_is_reproducible_given_seed() {
        let cfg = quick_cfg(4);
        let mut a = desk_system(16, 31);
        let mut b = desk_system(16, 31);
        let ra = train_modulators(&mut a, &cfg).unwrap();
        let rb = train_modulators(&mut b, &cfg).unwrap();
        assert_eq!(ra.loss_history, rb.loss_history);
        assert_eq!(
            a.inner_models()[0].flatten_params(),
            b.inner_models()[0].flatten_params()
        );
        assert_eq!(ra.after, rb.after);
    }

    #[test]
    fn sgd_step_matches_first_order_prediction() {
        // With tables frozen across the step (large refresh period), one
        // SGD step of size eps moves the same batch's loss by
        // -eps * ||g||^2 + O(eps^2).
        let mut sys = desk_system(16, 47);
        let mut cfg = quick_cfg(1);
        cfg.refresh_period = 1000;
        let sigma2 = crate::sim::snr_to_sigma2(cfg.snr_db, sys.rate()).unwrap();
        let acc = batch_pass(&sys, &cfg, sigma2, 0).unwrap();
        let g2: f64 = acc
            .per_stream
            .iter()
            .flat_map(|g| g.iter())
            .map(|&v| v * v)
            .sum();
        assert!(g2 > 0.0, "fixture gradient should not vanish");

        let eps = 1e-3 / g2.sqrt();
        for s in 0..sys.streams() {
            let p: Vec<f64> = sys.inner_models()[s]
                .flatten_params()
                .iter()
                .zip(&acc.per_stream[s])
                .map(|(&p, &g)| p - eps * g)
                .collect();
            sys.set_inner_params(s, &p).unwrap();
        }
        // Do NOT refresh tables: the prediction holds for the frozen
        // decode function the gradient was taken against.
        let after = batch_pass(&sys, &cfg, sigma2, 0).unwrap();
        let predicted = -eps * g2;
        let actual = after.loss - acc.loss;
        assert!(
            (actual - predicted).abs() <= 0.05 * predicted.abs(),
            "step moved the loss by {actual:.3e}, first order predicts {predicted:.3e}"
        );
    }

    #[test]
    fn table_versions_track_the_refresh_period() {
        let mut sys = desk_system(16, 31);
        let mut cfg = quick_cfg(6);
        cfg.refresh_period = 2;
        let report = train_modulators(&mut sys, &cfg).unwrap();
        assert_eq!(report.table_versions, vec![0, 0, 1, 1, 2, 2]);
        // The final refresh leaves nothing stale.
        assert_eq!(sys.table_version(), 3);

        let mut csv = Vec::new();
        write_loss_csv(&mut csv, &report).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), "update,loss,table_version");
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().nth(1).unwrap().starts_with("1,"));
    }

    #[test]
    fn divergence_guard_aborts() {
        // At 10 dB the untrained link already decodes almost cleanly (its
        // tables match whatever the modulators do), so the baseline loss is
        // small. An absurd step size then wrecks the modulators while the
        // decoder tables stay frozen, parking the loss far above ten times
        // the baseline until the guard trips.
        let mut sys = desk_system(16, 31);
        let mut cfg = quick_cfg(DIVERGENCE_PATIENCE + 10);
        cfg.optimizer = Optimizer::sgd(1e7);
        cfg.snr_db = 10.0;
        cfg.refresh_period = 1000; // keep the decoder tables fixed
        match train_modulators(&mut sys, &cfg) {
            Err(Error::Diverged(_)) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn exploding_weights_report_divergence_not_degeneracy() {
        // A step size big enough to overflow the convolution activations
        // turns the forward pass non-finite; inside the training loop that
        // is reported as divergence rather than a malformed-input error.
        let mut sys = desk_system(16, 31);
        let mut cfg = quick_cfg(DIVERGENCE_PATIENCE + 10);
        cfg.optimizer = Optimizer::sgd(1e300);
        cfg.refresh_period = 1000;
        match train_modulators(&mut sys, &cfg) {
            Err(Error::Diverged(_)) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let mut sys = desk_system(16, 31);
        for bad in [
            TrainConfig {
                batch: 0,
                ..quick_cfg(1)
            },
            TrainConfig {
                updates: 0,
                ..quick_cfg(1)
            },
            TrainConfig {
                iterations: 0,
                ..quick_cfg(1)
            },
            TrainConfig {
                refresh_period: 0,
                ..quick_cfg(1)
            },
            TrainConfig {
                optimizer: Optimizer::sgd(-1.0),
                ..quick_cfg(1)
            },
        ] {
            assert!(train_modulators(&mut sys, &bad).is_err());
        }
    }

    #[test]
    fn validation_is_paired_across_calls() {
        let sys = desk_system(16, 31);
        let a = validate_link(&sys, 2, 2.0, 32, 9).unwrap();
        let b = validate_link(&sys, 2, 2.0, 32, 9).unwrap();
        assert_eq!(a, b);
        let c = validate_link(&sys, 2, 2.0, 32, 10).unwrap();
        assert!(a != c || a.bler == c.bler, "different seeds draw different blocks");
    }

    #[test]
    fn a_few_adam_updates_reduce_the_validation_loss() {
        // Short smoke training: random modulators at a friendly SNR should
        // improve measurably within a handful of updates.
        let mut sys = desk_system(16, 203);
        let cfg = TrainConfig {
            batch: 24,
            optimizer: Optimizer::adam(2e-3),
            snr_db: 3.0,
            iterations: 2,
            updates: 12,
            seed: 11,
            refresh_period: 1,
        };
        let report = train_modulators(&mut sys, &cfg).unwrap();
        assert!(
            report.after.bce < report.before.bce,
            "validation BCE went from {:.4} to {:.4}",
            report.before.bce,
            report.after.bce
        );
    }
}
