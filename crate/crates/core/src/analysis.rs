//! Receptive-window estimation for black-box encoders.
//!
//! Two estimators measure how much each window offset influences an output:
//! gradient energy (mean squared input sensitivity at random points) and
//! flip energy (mean squared output change under single-input sign flips).
//! Thresholding either profile yields the contiguous offset set `J` that a
//! trellis has to track; the complement can be averaged out.

use crate::codes::{BlockEncoder, DifferentiableEncoder};
use crate::tensor::{wrap_index, Tensor};
use crate::{Error, Result, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Hard cap on exact window enumeration: `2^20` evaluations.
pub const EXACT_WINDOW_CAP: usize = 20;

/// Default threshold separating active from negligible offsets.
pub const DEFAULT_THRESHOLD: f64 = 2e-2;

/// Per-offset energies over an encoder's receptive window.
#[derive(Debug, Clone)]
pub struct EnergyProfile<S> {
    window: (isize, isize),
    raw: Vec<S>,
    normalized: Vec<S>,
    /// Largest deviation seen when spot-checking a second output position;
    /// should be numerically zero for shift-equivariant encoders.
    spot_check_dev: f64,
}

impl<S: Scalar> EnergyProfile<S> {
    fn new(window: (isize, isize), raw: Vec<S>, spot_check_dev: f64) -> Self {
        let max = raw.iter().copied().fold(S::zero(), S::max);
        let normalized = if max > S::zero() {
            raw.iter().map(|&v| v / max).collect()
        } else {
            vec![S::zero(); raw.len()]
        };
        EnergyProfile {
            window,
            raw,
            normalized,
            spot_check_dev,
        }
    }

    pub fn window(&self) -> (isize, isize) {
        self.window
    }

    pub fn offsets(&self) -> impl Iterator<Item = isize> {
        self.window.0..=self.window.1
    }

    /// Raw per-offset energies, lowest offset first.
    pub fn raw(&self) -> &[S] {
        &self.raw
    }

    /// Energies scaled so the largest equals one (all zero when flat).
    pub fn normalized(&self) -> &[S] {
        &self.normalized
    }

    pub fn spot_check_dev(&self) -> f64 {
        self.spot_check_dev
    }
}

/// Estimated contiguous memory window of an encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryProfile {
    window: (isize, isize),
    j_lo: isize,
    j_hi: isize,
    memoryless: bool,
}

impl MemoryProfile {
    /// Profile with an explicitly chosen contiguous window `J` (used when a
    /// memory budget is fixed up front rather than estimated).
    pub fn explicit(window: (isize, isize), j_lo: isize, j_hi: isize) -> Result<Self> {
        if j_lo > j_hi || j_lo < window.0 || j_hi > window.1 {
            return Err(Error::invalid(format!(
                "J = [{j_lo}, {j_hi}] must be contiguous inside the window [{}, {}]",
                window.0, window.1
            )));
        }
        Ok(MemoryProfile {
            window,
            j_lo,
            j_hi,
            memoryless: false,
        })
    }

    /// Centered window of `memory + 1` offsets inside `window`.
    pub fn centered_budget(window: (isize, isize), memory: usize) -> Result<Self> {
        let j_lo = -((memory as isize) + 1) / 2;
        let j_hi = j_lo + memory as isize;
        Self::explicit(window, j_lo, j_hi)
    }

    pub fn window(&self) -> (isize, isize) {
        self.window
    }

    /// Lowest and highest contributing offset.
    pub fn j(&self) -> (isize, isize) {
        (self.j_lo, self.j_hi)
    }

    /// Trellis memory `m`: the span of `J` (zero when memoryless).
    pub fn memory(&self) -> usize {
        if self.memoryless {
            0
        } else {
            (self.j_hi - self.j_lo) as usize
        }
    }

    /// No offset cleared the threshold; `J` collapses to `{0}`.
    pub fn memoryless(&self) -> bool {
        self.memoryless
    }

    /// Memoryless except for offset zero itself: the stream acts as plain
    /// (possibly scaled) antipodal signalling.
    pub fn is_bpsk_like(&self) -> bool {
        !self.memoryless && self.j_lo == 0 && self.j_hi == 0
    }

    /// Offsets inside `J`, lowest first.
    pub fn contributing_offsets(&self) -> Vec<isize> {
        (self.j_lo..=self.j_hi).collect()
    }

    /// Window offsets outside `J`, lowest first.
    pub fn free_offsets(&self) -> Vec<isize> {
        (self.window.0..=self.window.1)
            .filter(|&o| o < self.j_lo || o > self.j_hi)
            .collect()
    }

    /// Union profile across streams: the span covering every stream's `J`.
    pub fn merge(profiles: &[MemoryProfile]) -> Result<MemoryProfile> {
        if profiles.is_empty() {
            return Err(Error::invalid("nothing to merge"));
        }
        let window = (
            profiles.iter().map(|p| p.window.0).min().expect("non-empty"),
            profiles.iter().map(|p| p.window.1).max().expect("non-empty"),
        );
        let active: Vec<&MemoryProfile> = profiles.iter().filter(|p| !p.memoryless).collect();
        if active.is_empty() {
            return Ok(MemoryProfile {
                window,
                j_lo: 0,
                j_hi: 0,
                memoryless: true,
            });
        }
        Ok(MemoryProfile {
            window,
            j_lo: active.iter().map(|p| p.j_lo).min().expect("non-empty"),
            j_hi: active.iter().map(|p| p.j_hi).max().expect("non-empty"),
            memoryless: false,
        })
    }
}

/// Thresholds a normalized energy profile into a memory estimate: `J` spans
/// the first through last offset whose normalized energy exceeds `t`.
pub fn estimate_memory<S: Scalar>(profile: &EnergyProfile<S>, threshold: f64) -> MemoryProfile {
    let t = S::of(threshold);
    let mut j_lo = None;
    let mut j_hi = None;
    for (o, &e) in profile.offsets().zip(profile.normalized()) {
        if e > t {
            j_lo.get_or_insert(o);
            j_hi = Some(o);
        }
    }
    match (j_lo, j_hi) {
        (Some(lo), Some(hi)) => MemoryProfile {
            window: profile.window,
            j_lo: lo,
            j_hi: hi,
            memoryless: false,
        },
        _ => MemoryProfile {
            window: profile.window,
            j_lo: 0,
            j_hi: 0,
            memoryless: true,
        },
    }
}

/// Shrinks a profile's contributing window to at most `budget` memory by
/// repeatedly dropping whichever end offset carries less energy. Used to
/// build deliberately smaller decoders than the estimate asks for.
pub fn trim_to_budget<S: Scalar>(
    energy: &EnergyProfile<S>,
    profile: &MemoryProfile,
    budget: usize,
) -> Result<MemoryProfile> {
    if energy.window != profile.window {
        return Err(Error::invalid(
            "energy and memory profiles describe different windows",
        ));
    }
    if profile.memoryless() || profile.memory() <= budget {
        return Ok(profile.clone());
    }
    let (w_lo, _) = energy.window;
    let raw = energy.raw();
    let at = |o: isize| raw[(o - w_lo) as usize].to64();
    let (mut lo, mut hi) = profile.j();
    while (hi - lo) as usize > budget {
        if at(lo) <= at(hi) {
            lo += 1;
        } else {
            hi -= 1;
        }
    }
    MemoryProfile::explicit(profile.window, lo, hi)
}

fn require_single_stream<S: Scalar>(enc: &impl BlockEncoder<S>) -> Result<(isize, isize, usize)> {
    if enc.input_depth() != 1 {
        return Err(Error::invalid(
            "profiles are per input stream; split multi-stream encoders first",
        ));
    }
    let (lo, hi) = enc.window();
    let w = (hi - lo + 1) as usize;
    Ok((lo, hi, w))
}

/// Settings for [`grad_energy`].
#[derive(Debug, Clone)]
pub struct GradEnergyConfig {
    pub out_depth: usize,
    /// Number of random bipolar inputs averaged over.
    pub batch: usize,
    pub seed: u64,
}

impl GradEnergyConfig {
    pub fn new(out_depth: usize, seed: u64) -> Self {
        GradEnergyConfig {
            out_depth,
            batch: 1000,
            seed,
        }
    }
}

/// Mean squared input gradient per window offset, averaged over random
/// bipolar inputs. Cheap but blind to quantizers except through their
/// surrogate gradients.
pub fn grad_energy<S: Scalar, E: DifferentiableEncoder<S>>(
    enc: &E,
    cfg: &GradEnergyConfig,
) -> Result<EnergyProfile<S>> {
    let (lo, _hi, w) = require_single_stream(enc)?;
    if cfg.batch == 0 {
        return Err(Error::invalid("batch must be positive"));
    }
    if cfg.out_depth >= enc.output_depth() {
        return Err(Error::invalid("output stream index out of range"));
    }
    // Work on blocks exactly one window wide: offsets then map one-to-one
    // onto block positions relative to the probe output.
    let p0 = wrap_index(-lo, w);
    let p1 = (p0 + 1) % w;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut acc = vec![S::zero(); w];
    let mut spot_dev = 0.0f64;
    for sample in 0..cfg.batch {
        let block = Tensor::from_fn(w, 1, |_, _| {
            if rng.gen::<bool>() {
                S::one()
            } else {
                -S::one()
            }
        });
        let g = enc.output_input_gradient(&block, p0, cfg.out_depth)?;
        for (j, a) in acc.iter_mut().enumerate() {
            let v = g.at(wrap_index(p0 as isize + lo + j as isize, w), 0);
            *a += v * v;
        }
        // Spot-check shift equivariance on a few samples: the gradient of
        // the next output on the shifted block must reproduce `g`.
        if sample < 8 && w > 1 {
            let shifted = Tensor::from_fn(w, 1, |p, d| block.at((p + w - 1) % w, d));
            let g1 = enc.output_input_gradient(&shifted, p1, cfg.out_depth)?;
            for j in 0..w {
                let a = g.at(wrap_index(p0 as isize + lo + j as isize, w), 0).to64();
                let b = g1
                    .at(wrap_index(p1 as isize + lo + j as isize, w), 0)
                    .to64();
                spot_dev = spot_dev.max((a - b).abs());
            }
        }
    }
    let scale = S::one() / S::of(cfg.batch as f64);
    for a in &mut acc {
        *a *= scale;
    }
    Ok(EnergyProfile::new((lo, lo + w as isize - 1), acc, spot_dev))
}

/// How [`flip_energy`] and friends traverse the window space.
#[derive(Debug, Clone, Copy)]
pub enum FlipMode {
    /// Enumerate all `2^window` inputs; refused above [`EXACT_WINDOW_CAP`].
    Exact,
    /// Average over `count` seeded random windows.
    Sampled { count: usize, seed: u64 },
}

/// Evaluates the encoder on every window (exact mode), in index order.
fn window_table<S: Scalar, E: BlockEncoder<S>>(
    enc: &E,
    w: usize,
    out_depth: usize,
) -> Result<Vec<S>> {
    let total = 1usize << w;
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let window = Tensor::from_fn(w, 1, |j, _| {
                if idx >> (w - 1 - j) & 1 == 1 {
                    -S::one()
                } else {
                    S::one()
                }
            });
            Ok(enc.encode_window(&window)?[out_depth])
        })
        .collect()
}

/// Mean squared output change under single-offset sign flips:
/// `e(j) = mean_v |f(v) - f(v with offset j flipped)|^2 / 4`.
///
/// Exact mode averages over all `2^window` inputs and captures quantizers
/// exactly; sampled mode is the fallback for wide windows.
pub fn flip_energy<S: Scalar, E: BlockEncoder<S>>(
    enc: &E,
    out_depth: usize,
    mode: FlipMode,
) -> Result<EnergyProfile<S>> {
    let (lo, hi, w) = require_single_stream(enc)?;
    if out_depth >= enc.output_depth() {
        return Err(Error::invalid("output stream index out of range"));
    }
    let quarter = S::of(0.25);
    let raw = match mode {
        FlipMode::Exact => {
            if w > EXACT_WINDOW_CAP {
                return Err(Error::TooLarge(format!(
                    "exact flip energy over a {w}-wide window needs 2^{w} evaluations \
                     (cap 2^{EXACT_WINDOW_CAP}); use sampled mode"
                )));
            }
            let table = window_table(enc, w, out_depth)?;
            let total = 1usize << w;
            let norm = quarter / S::of(total as f64);
            (0..w)
                .map(|j| {
                    let mask = 1usize << (w - 1 - j);
                    let mut sum = S::zero();
                    for (idx, &f) in table.iter().enumerate() {
                        let d = f - table[idx ^ mask];
                        sum += d * d;
                    }
                    sum * norm
                })
                .collect()
        }
        FlipMode::Sampled { count, seed } => {
            if count == 0 {
                return Err(Error::invalid("sample count must be positive"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut acc = vec![S::zero(); w];
            for _ in 0..count {
                let window = Tensor::from_fn(w, 1, |_, _| {
                    if rng.gen::<bool>() {
                        S::one()
                    } else {
                        -S::one()
                    }
                });
                let base = enc.encode_window(&window)?[out_depth];
                for (j, a) in acc.iter_mut().enumerate() {
                    let mut flipped = window.clone();
                    *flipped.at_mut(j, 0) = -flipped.at(j, 0);
                    let d = base - enc.encode_window(&flipped)?[out_depth];
                    *a += d * d;
                }
            }
            let norm = quarter / S::of(count as f64);
            acc.into_iter().map(|v| v * norm).collect()
        }
    };
    Ok(EnergyProfile::new((lo, hi), raw, 0.0))
}

/// Whether an output stream ever changes sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrozenStatus {
    FrozenPlus,
    FrozenMinus,
    Active,
}

/// Classifies each output stream as sign-frozen or active, enumerating all
/// windows when feasible and sampling random blocks otherwise.
pub fn detect_frozen_outputs<S: Scalar, E: BlockEncoder<S>>(
    enc: &E,
    trials: usize,
    seed: u64,
) -> Result<Vec<FrozenStatus>> {
    let (_lo, _hi, w) = require_single_stream(enc)?;
    let depth = enc.output_depth();
    let mut any_pos = vec![false; depth];
    let mut any_neg = vec![false; depth];
    let note = |row: &[S], any_pos: &mut Vec<bool>, any_neg: &mut Vec<bool>| {
        for (d, &v) in row.iter().enumerate() {
            if v < S::zero() {
                any_neg[d] = true;
            } else {
                any_pos[d] = true;
            }
        }
    };
    if w <= EXACT_WINDOW_CAP {
        for idx in 0..1usize << w {
            let window = Tensor::from_fn(w, 1, |j, _| {
                if idx >> (w - 1 - j) & 1 == 1 {
                    -S::one()
                } else {
                    S::one()
                }
            });
            note(&enc.encode_window(&window)?, &mut any_pos, &mut any_neg);
        }
    } else {
        if trials == 0 {
            return Err(Error::invalid("trial count must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            let block = Tensor::from_fn(w, 1, |_, _| {
                if rng.gen::<bool>() {
                    S::one()
                } else {
                    -S::one()
                }
            });
            let out = enc.encode_block(&block)?;
            for p in 0..out.positions() {
                note(out.row(p), &mut any_pos, &mut any_neg);
            }
        }
    }
    Ok((0..depth)
        .map(|d| match (any_pos[d], any_neg[d]) {
            (true, false) => FrozenStatus::FrozenPlus,
            (false, true) => FrozenStatus::FrozenMinus,
            _ => FrozenStatus::Active,
        })
        .collect())
}

/// Single-stream view of a multi-stream encoder: the selected input stream
/// varies, every other input is pinned to `+1`, and one output stream is
/// kept. Exact for separable encoders; [`split_fidelity`] measures the rest.
#[derive(Debug, Clone, Copy)]
pub struct StreamSlice<E> {
    base: E,
    in_stream: usize,
    out_stream: usize,
}

impl<E> StreamSlice<E> {
    pub fn new<S: Scalar>(base: E, in_stream: usize, out_stream: usize) -> Result<Self>
    where
        E: BlockEncoder<S>,
    {
        if in_stream >= base.input_depth() || out_stream >= base.output_depth() {
            return Err(Error::invalid("stream index out of range"));
        }
        Ok(StreamSlice {
            base,
            in_stream,
            out_stream,
        })
    }
}

fn widen<S: Scalar, E: BlockEncoder<S>>(slice: &StreamSlice<E>, input: &Tensor<S>) -> Tensor<S> {
    Tensor::from_fn(input.positions(), slice.base.input_depth(), |p, d| {
        if d == slice.in_stream {
            input.at(p, 0)
        } else {
            S::one()
        }
    })
}

impl<S: Scalar, E: BlockEncoder<S>> BlockEncoder<S> for StreamSlice<E> {
    fn input_depth(&self) -> usize {
        1
    }
    fn output_depth(&self) -> usize {
        1
    }
    fn window(&self) -> (isize, isize) {
        self.base.window()
    }
    fn encode_block(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        if input.depth() != 1 {
            return Err(Error::invalid("stream slice takes a single input stream"));
        }
        let out = self.base.encode_block(&widen(self, input))?;
        Ok(Tensor::from_column(out.column(self.out_stream)))
    }
}

impl<S: Scalar, E: DifferentiableEncoder<S>> DifferentiableEncoder<S> for StreamSlice<E> {
    fn output_input_gradient(
        &self,
        input: &Tensor<S>,
        out_pos: usize,
        out_depth: usize,
    ) -> Result<Tensor<S>> {
        if out_depth != 0 {
            return Err(Error::invalid("stream slice has a single output stream"));
        }
        let g = self
            .base
            .output_input_gradient(&widen(self, input), out_pos, self.out_stream)?;
        Ok(Tensor::from_column(g.column(self.in_stream)))
    }
}

/// Splits a two-in/two-out encoder into two single-stream views, input `j`
/// feeding output `j` with the other input pinned to `+1`.
pub fn split_inner_streams<S: Scalar, E: BlockEncoder<S> + Copy>(
    enc: E,
) -> Result<(StreamSlice<E>, StreamSlice<E>)> {
    if enc.input_depth() != 2 || enc.output_depth() < 2 {
        return Err(Error::invalid(
            "stream splitting expects two input streams and at least two output streams",
        ));
    }
    Ok((StreamSlice::new(enc, 0, 0)?, StreamSlice::new(enc, 1, 1)?))
}

/// Largest absolute deviation between the full encoder and its split views,
/// exhaustive over joint windows when affordable and sampled otherwise.
pub fn split_fidelity<S: Scalar, E: BlockEncoder<S> + Copy>(
    enc: E,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let (s0, s1) = split_inner_streams(enc)?;
    let (lo, hi) = enc.window();
    let w = (hi - lo + 1) as usize;
    let mut max_dev = 0.0f64;
    let mut check = |joint: &Tensor<S>| -> Result<()> {
        let full = enc.encode_window(joint)?;
        let w0 = Tensor::from_column(joint.column(0));
        let w1 = Tensor::from_column(joint.column(1));
        let d0 = (full[0] - s0.encode_window(&w0)?[0]).to64().abs();
        let d1 = (full[1] - s1.encode_window(&w1)?[0]).to64().abs();
        max_dev = max_dev.max(d0).max(d1);
        Ok(())
    };
    if 2 * w <= EXACT_WINDOW_CAP {
        for idx in 0..1usize << (2 * w) {
            let joint = Tensor::from_fn(w, 2, |p, d| {
                if idx >> (2 * w - 1 - (p * 2 + d)) & 1 == 1 {
                    -S::one()
                } else {
                    S::one()
                }
            });
            check(&joint)?;
        }
    } else {
        if trials == 0 {
            return Err(Error::invalid("trial count must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            let joint = Tensor::from_fn(w, 2, |_, _| {
                if rng.gen::<bool>() {
                    S::one()
                } else {
                    -S::one()
                }
            });
            check(&joint)?;
        }
    }
    Ok(max_dev)
}

/// Pearson correlation between two equally long samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::invalid("correlation needs two samples of equal length"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Degenerate("correlation of a constant sample".into()));
    }
    Ok(cov / (va * vb).sqrt())
}

/// Writes `offset,grad_energy,flip_energy,above_threshold` rows (normalized
/// energies; missing estimator columns stay empty).
pub fn write_profile_csv<S: Scalar, W: std::io::Write>(
    out: &mut W,
    grad: Option<&EnergyProfile<S>>,
    flip: Option<&EnergyProfile<S>>,
    threshold: f64,
) -> Result<()> {
    let window = match (grad, flip) {
        (Some(g), Some(f)) => {
            if g.window() != f.window() {
                return Err(Error::invalid("profiles cover different windows"));
            }
            g.window()
        }
        (Some(g), None) => g.window(),
        (None, Some(f)) => f.window(),
        (None, None) => return Err(Error::invalid("no profile to export")),
    };
    writeln!(out, "offset,grad_energy,flip_energy,above_threshold")?;
    let reference = flip.or(grad).expect("at least one profile");
    for (i, o) in (window.0..=window.1).enumerate() {
        let g = grad.map_or(String::new(), |p| format!("{}", p.normalized()[i].to64()));
        let f = flip.map_or(String::new(), |p| format!("{}", p.normalized()[i].to64()));
        let above = reference.normalized()[i].to64() > threshold;
        writeln!(out, "{o},{g},{f},{above}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::{Activation, CnnEncoder, CnnModel, ConvLayer};
    use rand::Rng;
    use crate::codes::{PolynomialBank, PolynomialEncoder};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn linear_tap_model(kernel: Vec<f64>) -> CnnEncoder<f64> {
        let k = kernel.len();
        CnnEncoder::new(
            CnnModel::new(vec![
                ConvLayer::new(kernel, vec![0.0], 1, 1, k, Activation::Linear).unwrap()
            ])
            .unwrap(),
            false,
        )
    }

    #[test]
    fn grad_energy_of_linear_taps_is_squared_kernel() {
        let enc = linear_tap_model(vec![0.6, -0.2, 1.0]);
        let prof = grad_energy(&enc, &GradEnergyConfig::new(0, 1)).unwrap();
        assert_eq!(prof.window(), (-1, 1));
        // Gradient of a linear model is constant, so the mean is exact.
        assert_relative_eq!(prof.raw()[0].to64(), 0.36, epsilon = 1e-12);
        assert_relative_eq!(prof.raw()[1].to64(), 0.04, epsilon = 1e-12);
        assert_relative_eq!(prof.raw()[2].to64(), 1.00, epsilon = 1e-12);
        assert_relative_eq!(prof.normalized()[1].to64(), 0.04, epsilon = 1e-12);
        assert!(prof.spot_check_dev() < 1e-12);
    }

    #[test]
    fn grad_energy_is_seed_deterministic() {
        let enc = CnnEncoder::new(CnnModel::<f64>::random(1, 3, 1, 2, 3, 77).unwrap(), false);
        let mut cfg = GradEnergyConfig::new(0, 9);
        cfg.batch = 64;
        let a = grad_energy(&enc, &cfg).unwrap();
        let b = grad_energy(&enc, &cfg).unwrap();
        assert_eq!(a.raw(), b.raw());
    }

    #[test]
    fn flip_energy_of_polynomial_is_exactly_indicator() {
        let enc = PolynomialEncoder::new(vec![-2, 0, 1]).unwrap();
        let prof = flip_energy::<f64, _>(&enc, 0, FlipMode::Exact).unwrap();
        assert_eq!(prof.window(), (-2, 1));
        assert_eq!(prof.raw(), &[1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn flip_energy_of_constant_encoder_is_zero() {
        let enc = CnnEncoder::new(
            CnnModel::new(vec![ConvLayer::new(
                vec![0.0, 0.0, 0.0],
                vec![2.5],
                1,
                1,
                3,
                Activation::Linear,
            )
            .unwrap()])
            .unwrap(),
            false,
        );
        let prof = flip_energy(&enc, 0, FlipMode::Exact).unwrap();
        assert!(prof.raw().iter().all(|&v| v == 0.0));
        assert!(prof.normalized().iter().all(|&v| v == 0.0));
        let est = estimate_memory(&prof, DEFAULT_THRESHOLD);
        assert!(est.memoryless());
        assert_eq!(est.memory(), 0);
        assert_eq!(est.j(), (0, 0));
    }

    #[test]
    fn sampled_flip_energy_tracks_exact() {
        let enc = CnnEncoder::new(CnnModel::<f64>::random(1, 4, 1, 3, 3, 21).unwrap(), false);
        let exact = flip_energy(&enc, 0, FlipMode::Exact).unwrap();
        let sampled = flip_energy(
            &enc,
            0,
            FlipMode::Sampled {
                count: 1 << 14,
                seed: 3,
            },
        )
        .unwrap();
        for (e, s) in exact.normalized().iter().zip(sampled.normalized()) {
            assert!((e - s).abs() < 0.02, "exact {e} vs sampled {s}");
        }
    }

    #[test]
    fn exact_mode_refuses_wide_windows() {
        let enc = CnnEncoder::new(CnnModel::<f64>::random(1, 2, 1, 6, 5, 1).unwrap(), false);
        assert_eq!(enc.window(), (-12, 12));
        match flip_energy(&enc, 0, FlipMode::Exact) {
            Err(Error::TooLarge(msg)) => assert!(msg.contains("sampled")),
            other => panic!("expected TooLarge, got {other:?}"),
        }
    }

    #[test]
    fn estimate_memory_on_paper_polynomials() {
        let g0 = PolynomialEncoder::new(vec![-2, 0, 1]).unwrap();
        let g1 = PolynomialEncoder::new(vec![-1, 0, 3]).unwrap();
        let p0 = estimate_memory(
            &flip_energy::<f64, _>(&g0, 0, FlipMode::Exact).unwrap(),
            DEFAULT_THRESHOLD,
        );
        let p1 = estimate_memory(
            &flip_energy::<f64, _>(&g1, 0, FlipMode::Exact).unwrap(),
            DEFAULT_THRESHOLD,
        );
        assert_eq!(p0.memory(), 3);
        assert_eq!(p0.j(), (-2, 1));
        assert_eq!(p1.memory(), 4);
        assert_eq!(p1.j(), (-1, 3));
        let joint = MemoryProfile::merge(&[p0, p1]).unwrap();
        assert_eq!(joint.memory(), 5);
        assert_eq!(joint.j(), (-2, 3));
    }

    #[test]
    fn estimate_memory_eight_wide_profile() {
        // A profile whose first and last active offsets are 8 apart yields
        // memory 7 regardless of dips in between.
        let raw = vec![0.001, 0.9, 0.3, 0.01, 0.5, 1.0, 0.04, 0.7, 0.025, 0.001];
        let prof = EnergyProfile::new((-5, 4), raw, 0.0);
        let est = estimate_memory(&prof, DEFAULT_THRESHOLD);
        assert_eq!(est.j(), (-4, 3));
        assert_eq!(est.memory(), 7);
    }

    #[test]
    fn bank_profiles_feed_joint_estimates() {
        let bank = PolynomialBank::from_taps(&[vec![-2, 0, 1], vec![-1, 0, 3]]).unwrap();
        let prof0 = flip_energy::<f64, _>(&bank, 0, FlipMode::Exact).unwrap();
        let prof1 = flip_energy::<f64, _>(&bank, 1, FlipMode::Exact).unwrap();
        // Energies over the union window are still exactly 0/1 indicators.
        let taps0: Vec<f64> = (-2..=3)
            .map(|o| if [-2, 0, 1].contains(&o) { 1.0 } else { 0.0 })
            .collect();
        assert_eq!(prof0.raw(), taps0.as_slice());
        let est = MemoryProfile::merge(&[
            estimate_memory(&prof0, DEFAULT_THRESHOLD),
            estimate_memory(&prof1, DEFAULT_THRESHOLD),
        ])
        .unwrap();
        assert_eq!(est.memory(), 5);
    }

    #[test]
    fn frozen_outputs_by_bias_sign() {
        // Three output streams: bias +3 (always positive), bias -3 (always
        // negative), and a small bias with a dominant tap (sign varies).
        let mut kernel = vec![0.0; 9];
        kernel[2 * 3] = 0.4; // sole input stream -> output stream 2, tap j = 0
        let layer = ConvLayer::new(kernel, vec![3.0, -3.0, 0.1], 1, 3, 3, Activation::Linear).unwrap();
        let enc = CnnEncoder::new(CnnModel::new(vec![layer]).unwrap(), true);
        let status = detect_frozen_outputs(&enc, 64, 5).unwrap();
        assert_eq!(
            status,
            vec![
                FrozenStatus::FrozenPlus,
                FrozenStatus::FrozenMinus,
                FrozenStatus::Active
            ]
        );
    }

    #[test]
    fn polynomial_outputs_are_active() {
        let enc = PolynomialEncoder::new(vec![0, 1]).unwrap();
        let status = detect_frozen_outputs::<f64, _>(&enc, 16, 1).unwrap();
        assert_eq!(status, vec![FrozenStatus::Active]);
    }

    /// Two independent single-stream maps packed as one 2-in/2-out model.
    fn separable_model() -> CnnModel<f64> {
        // kernel[id][od][j]: stream 0 -> out 0 with taps (0.5, 1, -0.5),
        // stream 1 -> out 1 with taps (1, 0, 1); no cross terms.
        let mut kernel = vec![0.0; 2 * 2 * 3];
        let k = |id: usize, od: usize, j: usize| (id * 2 + od) * 3 + j;
        kernel[k(0, 0, 0)] = 0.5;
        kernel[k(0, 0, 1)] = 1.0;
        kernel[k(0, 0, 2)] = -0.5;
        kernel[k(1, 1, 0)] = 1.0;
        kernel[k(1, 1, 2)] = 1.0;
        CnnModel::new(vec![
            ConvLayer::new(kernel, vec![0.0, 0.0], 2, 2, 3, Activation::Linear).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn splitting_separable_encoders_is_exact() {
        let model = separable_model();
        let enc = CnnEncoder::new(model, false);
        let dev = split_fidelity(&enc, 0, 0).unwrap();
        assert!(dev < 1e-12, "separable split deviated by {dev}");
    }

    #[test]
    fn splitting_coupled_encoders_reports_deviation() {
        let m = CnnModel::<f64>::random(2, 3, 2, 2, 3, 8).unwrap();
        let enc = CnnEncoder::new(m, false);
        let dev = split_fidelity(&enc, 0, 0).unwrap();
        assert!(dev > 1e-3, "random coupled model looked separable ({dev})");
    }

    #[test]
    fn single_offset_profile_flags_plain_signalling() {
        use crate::codes::TableEncoder;
        let outputs = Tensor::from_vec(vec![0.8, -0.8], 2, 1).unwrap();
        let enc = TableEncoder::new(vec![0], outputs).unwrap();
        let prof = flip_energy(&enc, 0, FlipMode::Exact).unwrap();
        let est = estimate_memory(&prof, DEFAULT_THRESHOLD);
        assert!(est.is_bpsk_like());
        assert_eq!(est.memory(), 0);
        assert!(!est.memoryless());
    }

    #[test]
    fn gradient_and_flip_energy_agree_on_smooth_models() {
        let enc = CnnEncoder::new(CnnModel::<f64>::random(1, 4, 1, 2, 5, 31).unwrap(), false);
        let gp = grad_energy(&enc, &GradEnergyConfig::new(0, 2)).unwrap();
        let fp = flip_energy(&enc, 0, FlipMode::Exact).unwrap();
        let r = pearson(
            &gp.normalized().iter().map(|v| v.to64()).collect::<Vec<_>>(),
            &fp.normalized().iter().map(|v| v.to64()).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!(r > 0.9, "estimators disagree: r = {r}");
    }

    #[test]
    fn csv_export_lists_offsets_and_flags() {
        let enc = PolynomialEncoder::new(vec![-2, 0, 1]).unwrap();
        let prof = flip_energy::<f64, _>(&enc, 0, FlipMode::Exact).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, None, Some(&prof), DEFAULT_THRESHOLD).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "offset,grad_energy,flip_energy,above_threshold");
        assert_eq!(lines[1], "-2,,1,true");
        assert_eq!(lines[3], "0,,1,true");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn budget_trim_drops_the_weaker_end_first() {
        // Energies 0.9 at -2, 0.2 at -1, 1.0 at 0, 0.4 at +1.
        let prof = EnergyProfile::new((-2, 1), vec![0.9, 0.2, 1.0, 0.4], 0.0);
        let full = estimate_memory(&prof, 0.05);
        assert_eq!(full.j(), (-2, 1));
        let m2 = trim_to_budget(&prof, &full, 2).unwrap();
        assert_eq!(m2.j(), (-2, 0), "the +1 end is weaker than the -2 end");
        let m1 = trim_to_budget(&prof, &full, 1).unwrap();
        assert_eq!(m1.j(), (-1, 0), "then -2 goes");
        let m0 = trim_to_budget(&prof, &full, 0).unwrap();
        assert_eq!(m0.j(), (0, 0));
        // Already within budget: unchanged.
        assert_eq!(trim_to_budget(&prof, &full, 3).unwrap().j(), (-2, 1));
        // Window mismatch is refused.
        let other = EnergyProfile::new((-3, 1), vec![0.1; 5], 0.0);
        assert!(trim_to_budget(&other, &full, 2).is_err());
    }

    proptest! {
        // Raising the threshold never widens the estimated window.
        #[test]
        fn estimates_shrink_with_threshold(seed in any::<u64>(), t1 in 0.01f64..0.5, t2 in 0.01f64..0.5) {
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..1.0)).collect();
            let prof = EnergyProfile::new((-4, 4), raw, 0.0);
            let wide = estimate_memory(&prof, lo);
            let narrow = estimate_memory(&prof, hi);
            prop_assert!(narrow.memory() <= wide.memory());
            if !narrow.memoryless() {
                prop_assert!(!wide.memoryless());
                prop_assert!(wide.j().0 <= narrow.j().0);
                prop_assert!(wide.j().1 >= narrow.j().1);
            }
        }
    }
}
