//! Finite-state trellis tables distilled from block encoders.
//!
//! A trellis with memory `m` tracks the last `m` input bits as its state.
//! Transition `tau = (state << 1) | bit` is simultaneously the window index
//! (MSB = oldest bit) of the `m + 1` pinned input bits, so the output table
//! is indexed directly by `tau`. Window offsets outside the pinned set `J`
//! are averaged out, exactly or by sampling. `delta` records the alignment
//! between input and output positions: consuming the input bit at position
//! `q` emits the observation for position `q - delta`.

use crate::analysis::MemoryProfile;
use crate::codes::{BipolarBlock, BlockEncoder};
use crate::tensor::{wrap_index, Tensor};
use crate::{Error, Result, Scalar};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::io::{Read, Write};

/// Largest supported memory: `2^(m+1)` table rows have to stay affordable.
pub const MAX_MEMORY: usize = 20;

/// Free offsets enumerated exactly up to `2^14`; beyond that, sample.
const EXACT_AVERAGE_CAP: usize = 14;

/// How window offsets outside the pinned set are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AveragingMode {
    /// Enumerate all assignments of the free offsets.
    Exact,
    /// Average over this many random assignments per transition.
    Sampled { count: usize },
    /// Exact when affordable, otherwise 256 samples.
    Auto,
}

/// Agreement between a trellis and the encoder it approximates.
#[derive(Debug, Clone, Copy)]
pub struct Fidelity {
    pub rms: f64,
    pub max: f64,
}

/// Transition-output table of a finite-state approximation to an encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Trellis<S> {
    memory: usize,
    delta: isize,
    depth: usize,
    /// `2^(memory + 1)` rows, one per transition, `depth` wide.
    outputs: Tensor<S>,
    /// All outputs are exactly `+1`/`-1` (pure bit encoders).
    bipolar: bool,
    /// Bumped every time the table is rebuilt against the live encoder.
    version: u64,
}

impl<S: Scalar> Trellis<S> {
    /// Builds the table by pinning the profile's contributing offsets and
    /// averaging the encoder over the remaining window offsets.
    pub fn from_profile<E: BlockEncoder<S>>(
        enc: &E,
        profile: &MemoryProfile,
        averaging: AveragingMode,
        seed: u64,
    ) -> Result<Self> {
        if enc.input_depth() != 1 {
            return Err(Error::invalid(
                "trellis construction takes a single input stream",
            ));
        }
        if profile.window() != enc.window() {
            return Err(Error::invalid(format!(
                "profile window {:?} does not match encoder window {:?}",
                profile.window(),
                enc.window()
            )));
        }
        let m = profile.memory();
        if m > MAX_MEMORY {
            return Err(Error::TooLarge(format!(
                "memory {m} exceeds the supported maximum {MAX_MEMORY}"
            )));
        }
        let (w_lo, _w_hi) = enc.window();
        let width = enc.window_width();
        let depth = enc.output_depth();
        let (j_lo, j_hi) = profile.j();
        let pinned: Vec<usize> = (j_lo..=j_hi).map(|o| (o - w_lo) as usize).collect();
        let free: Vec<usize> = profile
            .free_offsets()
            .iter()
            .map(|&o| (o - w_lo) as usize)
            .collect();
        let averaging = match averaging {
            AveragingMode::Auto => {
                if free.len() <= EXACT_AVERAGE_CAP {
                    AveragingMode::Exact
                } else {
                    AveragingMode::Sampled { count: 256 }
                }
            }
            other => other,
        };
        if let AveragingMode::Sampled { count: 0 } = averaging {
            return Err(Error::invalid("sample count must be positive"));
        }
        if let AveragingMode::Exact = averaging {
            if free.len() > EXACT_AVERAGE_CAP {
                return Err(Error::TooLarge(format!(
                    "exact averaging over {} free offsets needs 2^{} evaluations \
                     (cap 2^{EXACT_AVERAGE_CAP}); use sampled averaging",
                    free.len(),
                    free.len()
                )));
            }
        }
        let n_transitions = 1usize << (m + 1);
        let rows: Vec<Vec<S>> = (0..n_transitions)
            .into_par_iter()
            .map(|tau| -> Result<Vec<S>> {
                let mut window = Tensor::from_fn(width, 1, |_, _| S::one());
                for (k, &row) in pinned.iter().enumerate() {
                    if tau >> (m - k) & 1 == 1 {
                        *window.at_mut(row, 0) = -S::one();
                    }
                }
                let mut acc = vec![S::zero(); depth];
                let add = |out: &[S], acc: &mut Vec<S>| {
                    for (a, &v) in acc.iter_mut().zip(out) {
                        *a += v;
                    }
                };
                let total = match averaging {
                    AveragingMode::Exact => {
                        let f = free.len();
                        for assign in 0..1usize << f {
                            for (i, &row) in free.iter().enumerate() {
                                *window.at_mut(row, 0) = if assign >> (f - 1 - i) & 1 == 1 {
                                    -S::one()
                                } else {
                                    S::one()
                                };
                            }
                            add(&enc.encode_window(&window)?, &mut acc);
                        }
                        1usize << f
                    }
                    AveragingMode::Sampled { count } => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(tau as u64);
                        for _ in 0..count {
                            for &row in &free {
                                *window.at_mut(row, 0) =
                                    if rng.gen::<bool>() { -S::one() } else { S::one() };
                            }
                            add(&enc.encode_window(&window)?, &mut acc);
                        }
                        count
                    }
                    AveragingMode::Auto => unreachable!("resolved above"),
                };
                let norm = S::one() / S::of(total as f64);
                for a in &mut acc {
                    *a *= norm;
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let outputs = Tensor::from_fn(n_transitions, depth, |t, d| rows[t][d]);
        let bipolar = outputs
            .data()
            .iter()
            .all(|&v| v == S::one() || v == -S::one());
        Ok(Trellis {
            memory: m,
            delta: j_hi,
            depth,
            outputs,
            bipolar,
            version: 0,
        })
    }

    /// Exact trellis: the whole encoder window becomes the state, nothing is
    /// averaged. Suited to polynomial banks and other short-window encoders.
    pub fn from_encoder_exact<E: BlockEncoder<S>>(enc: &E) -> Result<Self> {
        let (lo, hi) = enc.window();
        let profile = MemoryProfile::explicit((lo, hi), lo, hi)?;
        Self::from_profile(enc, &profile, AveragingMode::Exact, 0)
    }

    /// Rebuilds the output table against the (possibly retrained) encoder.
    /// The shape must not change; the version counter is bumped.
    pub fn refresh_from<E: BlockEncoder<S>>(
        &mut self,
        enc: &E,
        profile: &MemoryProfile,
        averaging: AveragingMode,
        seed: u64,
    ) -> Result<()> {
        let fresh = Self::from_profile(enc, profile, averaging, seed)?;
        if fresh.memory != self.memory || fresh.delta != self.delta || fresh.depth != self.depth {
            return Err(Error::invalid(
                "refresh changed the trellis shape; build a new trellis instead",
            ));
        }
        self.outputs = fresh.outputs;
        self.bipolar = fresh.bipolar;
        self.version += 1;
        Ok(())
    }

    /// Builds a trellis directly from an output table (used by file loading
    /// and tests). Rows are transitions in index order.
    pub fn from_table(outputs: Tensor<S>, delta: isize, bipolar: bool) -> Result<Self> {
        let n = outputs.positions();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::invalid(
                "transition count must be a power of two and at least 2",
            ));
        }
        let m = n.trailing_zeros() as usize - 1;
        if m > MAX_MEMORY {
            return Err(Error::TooLarge(format!(
                "memory {m} exceeds the supported maximum {MAX_MEMORY}"
            )));
        }
        if !outputs.is_finite() {
            return Err(Error::invalid("table outputs must be finite"));
        }
        let depth = outputs.depth();
        Ok(Trellis {
            memory: m,
            delta,
            depth,
            outputs,
            bipolar,
            version: 0,
        })
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn num_states(&self) -> usize {
        1 << self.memory
    }

    pub fn num_transitions(&self) -> usize {
        1 << (self.memory + 1)
    }

    /// Input position `q` emits the observation for position `q - delta`.
    pub fn delta(&self) -> isize {
        self.delta
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn bipolar(&self) -> bool {
        self.bipolar
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn outputs(&self) -> &Tensor<S> {
        &self.outputs
    }

    /// Output row of one transition.
    pub fn output(&self, tau: usize) -> &[S] {
        self.outputs.row(tau)
    }

    pub fn from_state(&self, tau: usize) -> usize {
        tau >> 1
    }

    pub fn to_state(&self, tau: usize) -> usize {
        tau & (self.num_states() - 1)
    }

    /// Input bit of a transition (`1` stands for bipolar `-1`).
    pub fn input_bit(&self, tau: usize) -> usize {
        tau & 1
    }

    /// Input bit of a transition in bipolar form.
    pub fn input_symbol(&self, tau: usize) -> S {
        if tau & 1 == 1 {
            -S::one()
        } else {
            S::one()
        }
    }

    /// Mean squared table output. Uniform input bits visit every transition
    /// equally often, so this is the exact transmit power per symbol.
    pub fn mean_power(&self) -> S {
        self.outputs.mean_square()
    }

    /// Scales every output (transmit-power calibration). Clears the bipolar
    /// flag unless the factor is exactly one in magnitude.
    pub fn scale_outputs(&mut self, factor: S) {
        self.outputs.scale(factor);
        if factor.abs() != S::one() {
            self.bipolar = false;
        }
    }

    /// Encodes a circular block through the table: position `p` is produced
    /// by the window of input bits at `p + j_lo ..= p + j_hi`.
    pub fn encode_block(&self, input: &BipolarBlock<S>) -> Result<Tensor<S>> {
        if input.depth() != 1 {
            return Err(Error::invalid("trellis encodes a single input stream"));
        }
        let n = input.positions();
        if n < self.memory + 1 {
            return Err(Error::invalid(format!(
                "block of {n} bits is shorter than the {} pinned window",
                self.memory + 1
            )));
        }
        let j_lo = self.delta - self.memory as isize;
        let mut taus = vec![0usize; n];
        for (p, tau) in taus.iter_mut().enumerate() {
            let mut idx = 0usize;
            for k in 0..=self.memory {
                let v = input.at(wrap_index(p as isize + j_lo + k as isize, n), 0);
                idx = idx << 1 | usize::from(v < S::zero());
            }
            *tau = idx;
        }
        Ok(Tensor::from_fn(n, self.depth, |p, d| {
            self.outputs.at(taus[p], d)
        }))
    }

    /// RMS and worst-case deviation from the live encoder over random blocks.
    pub fn fidelity<E: BlockEncoder<S>>(
        &self,
        enc: &E,
        blocks: usize,
        block_len: usize,
        seed: u64,
    ) -> Result<Fidelity> {
        if blocks == 0 {
            return Err(Error::invalid("block count must be positive"));
        }
        let needed = enc.window_width().max(self.memory + 1);
        if block_len < needed {
            return Err(Error::invalid(format!(
                "blocks of {block_len} bits are shorter than the {needed}-bit window"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sq_sum = 0.0f64;
        let mut max = 0.0f64;
        let mut count = 0usize;
        for _ in 0..blocks {
            let block = BipolarBlock::random(block_len, 1, &mut rng);
            let want = enc.encode_block(block.tensor())?;
            let got = self.encode_block(&block)?;
            for (a, b) in want.data().iter().zip(got.data()) {
                let d = (*a - *b).to64();
                sq_sum += d * d;
                max = max.max(d.abs());
                count += 1;
            }
        }
        Ok(Fidelity {
            rms: (sq_sum / count as f64).sqrt(),
            max,
        })
    }

    /// Writes the table in the binary `STRL` format (f64 little-endian).
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"STRL")?;
        w.write_u32::<LittleEndian>(1)?;
        w.write_u64::<LittleEndian>(self.memory as u64)?;
        w.write_i64::<LittleEndian>(self.delta as i64)?;
        w.write_u64::<LittleEndian>(self.depth as u64)?;
        w.write_u8(u8::from(self.bipolar))?;
        w.write_u64::<LittleEndian>(self.version)?;
        for &v in self.outputs.data() {
            w.write_f64::<LittleEndian>(v.to64())?;
        }
        Ok(())
    }

    /// Reads a table written by [`Trellis::save`].
    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"STRL" {
            return Err(Error::Parse("not a trellis file (bad magic)".into()));
        }
        let file_version = r.read_u32::<LittleEndian>()?;
        if file_version != 1 {
            return Err(Error::Parse(format!(
                "unsupported trellis file version {file_version}"
            )));
        }
        let memory = r.read_u64::<LittleEndian>()? as usize;
        if memory > MAX_MEMORY {
            return Err(Error::TooLarge(format!(
                "memory {memory} exceeds the supported maximum {MAX_MEMORY}"
            )));
        }
        let delta = r.read_i64::<LittleEndian>()?;
        if delta.unsigned_abs() > 64 {
            return Err(Error::Parse(format!("implausible alignment {delta}")));
        }
        let depth = r.read_u64::<LittleEndian>()? as usize;
        if depth == 0 || depth > 1 << 20 {
            return Err(Error::Parse(format!("implausible depth {depth}")));
        }
        let bipolar = match r.read_u8()? {
            0 => false,
            1 => true,
            other => return Err(Error::Parse(format!("bad bipolar flag {other}"))),
        };
        let version = r.read_u64::<LittleEndian>()?;
        let n = 1usize << (memory + 1);
        let mut data = Vec::with_capacity(n * depth);
        for _ in 0..n * depth {
            data.push(S::of(r.read_f64::<LittleEndian>()?));
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Parse("trailing bytes after trellis table".into()));
        }
        let outputs = Tensor::from_vec(data, n, depth)?;
        if !outputs.is_finite() {
            return Err(Error::Parse("non-finite table outputs".into()));
        }
        let mut t = Self::from_table(outputs, delta as isize, bipolar)?;
        t.version = version;
        Ok(t)
    }
}

impl<S: Scalar> fmt::Display for Trellis<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "trellis: memory={} states={} transitions={} delta={} depth={} bipolar={} version={}",
            self.memory,
            self.num_states(),
            self.num_transitions(),
            self.delta,
            self.depth,
            self.bipolar,
            self.version
        )?;
        for tau in 0..self.num_transitions() {
            write!(
                f,
                "tau={tau:4}  {:3} -> {:3}  bit={}  |",
                self.from_state(tau),
                self.to_state(tau),
                self.input_bit(tau)
            )?;
            for &v in self.output(tau) {
                write!(f, " {:+.6}", v.to64())?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{estimate_memory, flip_energy, FlipMode, DEFAULT_THRESHOLD};
    use crate::cnn::{CnnEncoder, CnnModel};
    use crate::codes::{PolynomialBank, PolynomialEncoder};
    use proptest::prelude::*;

    #[test]
    fn exact_trellis_of_two_tap_product() {
        let enc = PolynomialEncoder::new(vec![0, 1]).unwrap();
        let t = Trellis::<f64>::from_encoder_exact(&enc).unwrap();
        assert_eq!(t.memory(), 1);
        assert_eq!(t.num_states(), 2);
        assert_eq!(t.num_transitions(), 4);
        assert_eq!(t.delta(), 1);
        assert!(t.bipolar());
        // tau bits are (older, newer); output is their bipolar product.
        assert_eq!(t.output(0), &[1.0]);
        assert_eq!(t.output(1), &[-1.0]);
        assert_eq!(t.output(2), &[-1.0]);
        assert_eq!(t.output(3), &[1.0]);
    }

    #[test]
    fn transition_indexing_is_consistent() {
        let enc = PolynomialEncoder::new(vec![-2, 0, 1]).unwrap();
        let t = Trellis::<f64>::from_encoder_exact(&enc).unwrap();
        assert_eq!(t.memory(), 3);
        for tau in 0..t.num_transitions() {
            let rebuilt = (t.from_state(tau) << 1 | t.input_bit(tau)) & (t.num_transitions() - 1);
            assert_eq!(rebuilt, tau);
            assert_eq!(t.to_state(tau), tau & (t.num_states() - 1));
            let sym = t.input_symbol(tau);
            assert_eq!(sym < 0.0, t.input_bit(tau) == 1);
        }
    }

    #[test]
    fn exact_trellis_reproduces_polynomial_blocks() {
        let enc = PolynomialEncoder::new(vec![-2, 0, 1]).unwrap();
        let t = Trellis::<f64>::from_encoder_exact(&enc).unwrap();
        let fid = t.fidelity(&enc, 20, 16, 7).unwrap();
        assert_eq!(fid.rms, 0.0);
        assert_eq!(fid.max, 0.0);
    }

    #[test]
    fn joint_bank_trellis_has_union_memory() {
        let bank = PolynomialBank::from_taps(&[vec![-2, 0, 1], vec![-1, 0, 3]]).unwrap();
        let t = Trellis::<f64>::from_encoder_exact(&bank).unwrap();
        assert_eq!(t.memory(), 5);
        assert_eq!(t.num_states(), 32);
        assert_eq!(t.num_transitions(), 64);
        assert_eq!(t.delta(), 3);
        assert_eq!(t.depth(), 2);
        assert!(t.bipolar());
        let fid = t.fidelity(&bank, 20, 24, 3).unwrap();
        assert_eq!(fid.max, 0.0);
    }

    #[test]
    fn profile_built_trellis_matches_estimated_memory() {
        let enc = PolynomialEncoder::new(vec![-1, 0, 3]).unwrap();
        let prof = estimate_memory(
            &flip_energy::<f64, _>(&enc, 0, FlipMode::Exact).unwrap(),
            DEFAULT_THRESHOLD,
        );
        let t = Trellis::<f64>::from_profile(&enc, &prof, AveragingMode::Auto, 0).unwrap();
        assert_eq!(t.memory(), 4);
        assert_eq!(t.delta(), 3);
        let fid = t.fidelity(&enc, 10, 16, 11).unwrap();
        assert_eq!(fid.max, 0.0);
    }

    #[test]
    fn averaging_a_multiplicative_free_tap_zeroes_the_table() {
        // Pinning only offsets [0, 1] of u[p-2]*u[p]*u[p+1] leaves the free
        // tap at -2 multiplying the output; averaging it over +/-1 gives 0.
        let enc = PolynomialEncoder::new(vec![-2, 0, 1]).unwrap();
        let prof = MemoryProfile::explicit(enc.window(), 0, 1).unwrap();
        let t = Trellis::<f64>::from_profile(&enc, &prof, AveragingMode::Exact, 0).unwrap();
        assert_eq!(t.memory(), 1);
        assert!(!t.bipolar());
        assert!(t.outputs().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sampled_averaging_tracks_exact() {
        let model = CnnModel::<f64>::random(1, 4, 1, 3, 3, 5).unwrap();
        let enc = CnnEncoder::new(model, false);
        let (lo, hi) = enc.window();
        assert_eq!((lo, hi), (-3, 3));
        let prof = MemoryProfile::explicit((lo, hi), -1, 1).unwrap();
        let exact = Trellis::from_profile(&enc, &prof, AveragingMode::Exact, 0).unwrap();
        let sampled = Trellis::from_profile(
            &enc,
            &prof,
            AveragingMode::Sampled { count: 4096 },
            9,
        )
        .unwrap();
        let dev = exact.outputs().max_abs_diff(sampled.outputs());
        assert!(dev < 0.05, "sampled averaging off by {dev}");
        // Same seed, same table.
        let again = Trellis::from_profile(
            &enc,
            &prof,
            AveragingMode::Sampled { count: 4096 },
            9,
        )
        .unwrap();
        assert_eq!(sampled.outputs(), again.outputs());
    }

    #[test]
    fn binarized_cnn_with_full_window_is_exact() {
        let model = CnnModel::<f64>::random(1, 3, 2, 2, 3, 13).unwrap();
        let enc = CnnEncoder::new(model, true);
        let t = Trellis::from_encoder_exact(&enc).unwrap();
        assert!(t.bipolar());
        let fid = t.fidelity(&enc, 10, 12, 2).unwrap();
        assert_eq!(fid.max, 0.0);
    }

    #[test]
    fn refresh_bumps_version_and_rejects_shape_changes() {
        let enc = PolynomialEncoder::new(vec![0, 1]).unwrap();
        let mut t = Trellis::<f64>::from_encoder_exact(&enc).unwrap();
        assert_eq!(t.version(), 0);
        let prof = MemoryProfile::explicit((0, 1), 0, 1).unwrap();
        t.refresh_from(&enc, &prof, AveragingMode::Exact, 0).unwrap();
        assert_eq!(t.version(), 1);
        let narrow = MemoryProfile::explicit((0, 1), 1, 1).unwrap();
        assert!(t.refresh_from(&enc, &narrow, AveragingMode::Exact, 0).is_err());
        assert_eq!(t.version(), 1);
    }

    #[test]
    fn scaling_calibrates_mean_power() {
        let bank = PolynomialBank::from_taps(&[vec![0, 1], vec![0, 2]]).unwrap();
        let mut t = Trellis::<f64>::from_encoder_exact(&bank).unwrap();
        assert_eq!(t.mean_power(), 1.0);
        t.scale_outputs(0.5);
        assert!(!t.bipolar());
        assert_eq!(t.mean_power(), 0.25);
    }

    #[test]
    fn save_load_roundtrip_is_bit_exact() {
        let bank = PolynomialBank::from_taps(&[vec![-2, 0, 1], vec![-1, 0, 3]]).unwrap();
        let mut t = Trellis::<f64>::from_encoder_exact(&bank).unwrap();
        t.scale_outputs(0.75);
        let mut buf = Vec::new();
        t.save(&mut buf).unwrap();
        let back = Trellis::<f64>::load(buf.as_slice()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn load_rejects_corrupt_files() {
        let enc = PolynomialEncoder::new(vec![0, 1]).unwrap();
        let t = Trellis::<f64>::from_encoder_exact(&enc).unwrap();
        let mut buf = Vec::new();
        t.save(&mut buf).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            Trellis::<f64>::load(bad_magic.as_slice()),
            Err(Error::Parse(_))
        ));

        let truncated = &buf[..buf.len() - 3];
        assert!(Trellis::<f64>::load(truncated).is_err());

        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(matches!(
            Trellis::<f64>::load(trailing.as_slice()),
            Err(Error::Parse(_))
        ));

        let mut future = buf;
        future[4] = 9;
        assert!(matches!(
            Trellis::<f64>::load(future.as_slice()),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn dump_lists_every_transition() {
        let enc = PolynomialEncoder::new(vec![0, 1]).unwrap();
        let t = Trellis::<f64>::from_encoder_exact(&enc).unwrap();
        let text = t.to_string();
        assert!(text.contains("memory=1 states=2 transitions=4"));
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("tau=   3"));
    }

    proptest! {
        // The trellis view of a polynomial encoder is exact on any block.
        #[test]
        fn exact_trellis_equals_encoder(bits in proptest::collection::vec(any::<u8>(), 8..24)) {
            let bits: Vec<u8> = bits.into_iter().map(|b| b & 1).collect();
            let enc = PolynomialEncoder::new(vec![-1, 0, 2]).unwrap();
            let t = Trellis::<f64>::from_encoder_exact(&enc).unwrap();
            let block = BipolarBlock::<f64>::from_bits(&bits).unwrap();
            let want = enc.encode(&block).unwrap();
            let got = t.encode_block(&block).unwrap();
            prop_assert!(want.tensor().max_abs_diff(&got) == 0.0);
        }
    }
}
