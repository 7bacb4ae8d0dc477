use super::BipolarBlock;
use crate::tensor::wrap_index;
use crate::{Error, Result, Scalar};

/// Feed-forward circular polynomial encoder.
///
/// Each output position is the XOR (bipolar product) of the inputs at the
/// given tap offsets: `c[i] = prod_e u[(i + e) mod N]`. Offsets may be
/// negative (anticausal taps are fine because blocks are circular).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolynomialEncoder {
    taps: Vec<isize>,
}

impl PolynomialEncoder {
    pub fn new(mut taps: Vec<isize>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid("polynomial encoder needs at least one tap"));
        }
        taps.sort_unstable();
        if taps.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(
                "duplicate taps cancel over the binary field; remove the pair",
            ));
        }
        Ok(PolynomialEncoder { taps })
    }

    pub fn taps(&self) -> &[isize] {
        &self.taps
    }

    /// Lowest and highest tap offset.
    pub fn window(&self) -> (isize, isize) {
        (self.taps[0], *self.taps.last().expect("non-empty"))
    }

    /// Trellis memory of the encoder: the tap span.
    pub fn memory(&self) -> usize {
        let (lo, hi) = self.window();
        (hi - lo) as usize
    }

    /// Encodes one circular block (single stream in, single stream out).
    pub fn encode<S: Scalar>(&self, u: &BipolarBlock<S>) -> Result<BipolarBlock<S>> {
        if u.depth() != 1 {
            return Err(Error::invalid("polynomial encoder takes a single input stream"));
        }
        let n = u.positions();
        let (lo, hi) = self.window();
        if lo.unsigned_abs() + hi.unsigned_abs() >= n {
            return Err(Error::invalid(format!(
                "block length {n} is too short for taps spanning [{lo}, {hi}]"
            )));
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut prod = S::one();
            for &e in &self.taps {
                prod *= u.at(wrap_index(i as isize + e, n), 0);
            }
            out.push(prod);
        }
        BipolarBlock::new(crate::tensor::Tensor::from_column(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::BipolarBlock;
    use proptest::prelude::*;

    fn single_flip_block(n: usize, flip_at: usize) -> BipolarBlock<f64> {
        let mut bits = vec![0u8; n];
        bits[flip_at] = 1;
        BipolarBlock::from_bits(&bits).unwrap()
    }

    #[test]
    fn all_ones_input_stays_all_ones() {
        let enc = PolynomialEncoder::new(vec![-2, 0, 1]).unwrap();
        let u = BipolarBlock::<f64>::from_bits(&[0; 8]).unwrap();
        let c = enc.encode(&u).unwrap();
        assert_eq!(c.column(0), vec![1.0; 8]);
    }

    #[test]
    fn single_minus_one_lands_on_shifted_tap_positions() {
        // u[4] = -1 flips exactly the outputs whose windows cover position 4:
        // i + e = 4 for e in {-2, 0, 1} gives i in {6, 4, 3}.
        let enc = PolynomialEncoder::new(vec![-2, 0, 1]).unwrap();
        let c = enc.encode(&single_flip_block(8, 4)).unwrap();
        for i in 0..8 {
            let expect = if i == 6 || i == 4 || i == 3 { -1.0 } else { 1.0 };
            assert_eq!(c.at(i, 0), expect, "position {i}");
        }
    }

    #[test]
    fn short_block_is_rejected() {
        let enc = PolynomialEncoder::new(vec![-2, 0, 1]).unwrap();
        let u = BipolarBlock::<f64>::from_bits(&[0, 0, 1]).unwrap();
        assert!(enc.encode(&u).is_err());
    }

    #[test]
    fn duplicate_and_empty_taps_are_rejected() {
        assert!(PolynomialEncoder::new(vec![]).is_err());
        assert!(PolynomialEncoder::new(vec![0, 1, 0]).is_err());
    }

    proptest! {
        // XOR-linearity: encoding the product equals the product of encodings.
        #[test]
        fn encoding_is_linear_over_products(
            bits_a in proptest::collection::vec(0u8..2, 8..20),
            bits_b_seed in any::<u64>(),
            taps in proptest::collection::btree_set(-3isize..4, 1..4),
        ) {
            let n = bits_a.len();
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(bits_b_seed);
            let bits_b: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();

            let enc = PolynomialEncoder::new(taps.into_iter().collect()).unwrap();
            let a = BipolarBlock::<f64>::from_bits(&bits_a).unwrap();
            let b = BipolarBlock::<f64>::from_bits(&bits_b).unwrap();
            let lhs = enc.encode(&a.product(&b).unwrap()).unwrap();
            let rhs = enc.encode(&a).unwrap().product(&enc.encode(&b).unwrap()).unwrap();
            prop_assert_eq!(lhs.column(0), rhs.column(0));
        }
    }
}
