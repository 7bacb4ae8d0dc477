use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};
use rand::Rng;

/// Block of bipolar symbols: every entry is exactly `+1` or `-1`.
///
/// One row per block position, one column per bit stream.
#[derive(Debug, Clone, PartialEq)]
pub struct BipolarBlock<S> {
    t: Tensor<S>,
}

impl<S: Scalar> BipolarBlock<S> {
    /// Wraps a tensor, verifying every entry is `+1` or `-1`.
    pub fn new(t: Tensor<S>) -> Result<Self> {
        for &v in t.data() {
            if v != S::one() && v != -S::one() {
                return Err(Error::invalid(format!(
                    "bipolar block entries must be +1 or -1, found {v}"
                )));
            }
        }
        Ok(BipolarBlock { t })
    }

    /// Single-stream block from field bits (0 maps to `+1`, 1 to `-1`).
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut data = Vec::with_capacity(bits.len());
        for &b in bits {
            match b {
                0 => data.push(S::one()),
                1 => data.push(-S::one()),
                other => {
                    return Err(Error::invalid(format!("bit values must be 0 or 1, found {other}")))
                }
            }
        }
        Ok(BipolarBlock {
            t: Tensor::from_column(data),
        })
    }

    /// Uniformly random block.
    pub fn random<R: Rng + ?Sized>(positions: usize, depth: usize, rng: &mut R) -> Self {
        BipolarBlock {
            t: Tensor::from_fn(positions, depth, |_, _| {
                if rng.gen::<bool>() {
                    S::one()
                } else {
                    -S::one()
                }
            }),
        }
    }

    /// Hard decision on LLRs; zero resolves to `+1` by convention.
    pub fn hard_decide(llrs: &[S]) -> Self {
        let data = llrs
            .iter()
            .map(|&l| if l < S::zero() { -S::one() } else { S::one() })
            .collect();
        BipolarBlock {
            t: Tensor::from_column(data),
        }
    }

    pub fn positions(&self) -> usize {
        self.t.positions()
    }

    pub fn depth(&self) -> usize {
        self.t.depth()
    }

    #[inline]
    pub fn at(&self, pos: usize, d: usize) -> S {
        self.t.at(pos, d)
    }

    pub fn tensor(&self) -> &Tensor<S> {
        &self.t
    }

    pub fn into_tensor(self) -> Tensor<S> {
        self.t
    }

    pub fn column(&self, d: usize) -> Vec<S> {
        self.t.column(d)
    }

    /// Element-wise product (XOR in the bit domain); shapes must match.
    pub fn product(&self, other: &BipolarBlock<S>) -> Result<Self> {
        if self.positions() != other.positions() || self.depth() != other.depth() {
            return Err(Error::invalid("bipolar product requires matching shapes"));
        }
        let a = self.t.data();
        let b = other.t.data();
        let data: Vec<S> = a.iter().zip(b).map(|(x, y)| *x * *y).collect();
        Ok(BipolarBlock {
            t: Tensor::from_vec(data, self.positions(), self.depth()).expect("shape"),
        })
    }

    /// Number of positions whose rows differ from `other`'s.
    pub fn count_diff(&self, other: &BipolarBlock<S>) -> usize {
        assert_eq!(self.positions(), other.positions());
        assert_eq!(self.depth(), other.depth());
        (0..self.positions())
            .filter(|&p| (0..self.depth()).any(|d| self.at(p, d) != other.at(p, d)))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_map_zero_to_plus_one() {
        let b = BipolarBlock::<f64>::from_bits(&[0, 1, 1, 0]).unwrap();
        assert_eq!(b.column(0), vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn non_bipolar_entries_are_rejected() {
        let t = Tensor::from_vec(vec![1.0, 0.5], 2, 1).unwrap();
        assert!(BipolarBlock::new(t).is_err());
        assert!(BipolarBlock::<f64>::from_bits(&[0, 2]).is_err());
    }

    #[test]
    fn hard_decide_sends_zero_llr_to_plus_one() {
        let b = BipolarBlock::hard_decide(&[0.0, -0.3, 2.0]);
        assert_eq!(b.column(0), vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn product_is_xor() {
        let a = BipolarBlock::<f64>::from_bits(&[0, 1, 1]).unwrap();
        let b = BipolarBlock::<f64>::from_bits(&[1, 1, 0]).unwrap();
        let c = a.product(&b).unwrap();
        assert_eq!(c.column(0), vec![-1.0, 1.0, -1.0]);
    }
}
