use super::encoder::{window_index, BlockEncoder};
use crate::tensor::{wrap_index, Tensor};
use crate::{Error, Result, Scalar};

/// Lookup-table encoder: output rows indexed by the bipolar inputs at a
/// fixed set of window offsets.
///
/// The table has `2^offsets.len()` rows (see [`window_index`] for the row
/// numbering) and one column per output stream. Outputs may be arbitrary
/// reals, so this type also serves as the reference for "what a trellis
/// says the encoder does".
#[derive(Debug, Clone, PartialEq)]
pub struct TableEncoder<S> {
    offsets: Vec<isize>,
    outputs: Tensor<S>,
}

impl<S: Scalar> TableEncoder<S> {
    pub fn new(offsets: Vec<isize>, outputs: Tensor<S>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::invalid("table encoder needs at least one offset"));
        }
        if offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("window offsets must be strictly increasing"));
        }
        if offsets.len() > 24 {
            return Err(Error::TooLarge(format!(
                "table over {} offsets would need 2^{} rows; cap is 24",
                offsets.len(),
                offsets.len()
            )));
        }
        let rows = 1usize << offsets.len();
        if outputs.positions() != rows {
            return Err(Error::invalid(format!(
                "table needs {rows} rows for {} offsets, got {}",
                offsets.len(),
                outputs.positions()
            )));
        }
        if !outputs.is_finite() {
            return Err(Error::Degenerate("table entries must be finite".into()));
        }
        Ok(TableEncoder { offsets, outputs })
    }

    pub fn offsets(&self) -> &[isize] {
        &self.offsets
    }

    pub fn outputs(&self) -> &Tensor<S> {
        &self.outputs
    }
}

impl<S: Scalar> BlockEncoder<S> for TableEncoder<S> {
    fn input_depth(&self) -> usize {
        1
    }
    fn output_depth(&self) -> usize {
        self.outputs.depth()
    }
    fn window(&self) -> (isize, isize) {
        (self.offsets[0], *self.offsets.last().expect("non-empty"))
    }
    fn encode_block(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        if input.depth() != 1 {
            return Err(Error::invalid("table encoder takes a single input stream"));
        }
        let n = input.positions();
        let span = (self.window().1 - self.window().0) as usize;
        if span >= n {
            return Err(Error::invalid(format!(
                "block length {n} is too short for a window spanning {span}"
            )));
        }
        let mut out = Tensor::zeros(n, self.output_depth());
        let mut bits = vec![S::zero(); self.offsets.len()];
        for p in 0..n {
            for (j, &o) in self.offsets.iter().enumerate() {
                bits[j] = input.at(wrap_index(p as isize + o, n), 0);
            }
            let row = self.outputs.row(window_index(&bits));
            for (d, &v) in row.iter().enumerate() {
                *out.at_mut(p, d) = v;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{BipolarBlock, PolynomialEncoder};

    /// Builds the table equivalent of a polynomial encoder over its window.
    fn table_of_poly(taps: &[isize]) -> TableEncoder<f64> {
        let enc = PolynomialEncoder::new(taps.to_vec()).unwrap();
        let (lo, hi) = enc.window();
        let w = (hi - lo + 1) as usize;
        let rows = 1usize << w;
        let mut out = Tensor::zeros(rows, 1);
        for idx in 0..rows {
            let mut prod = 1.0;
            for &t in taps {
                let bit = idx >> (w - 1 - (t - lo) as usize) & 1;
                prod *= if bit == 1 { -1.0 } else { 1.0 };
            }
            *out.at_mut(idx, 0) = prod;
        }
        TableEncoder::new((lo..=hi).collect(), out).unwrap()
    }

    #[test]
    fn table_reproduces_polynomial_outputs() {
        let taps = [-2isize, 0, 1];
        let poly = PolynomialEncoder::new(taps.to_vec()).unwrap();
        let table = table_of_poly(&taps);
        let mut bits = vec![0u8; 9];
        bits[2] = 1;
        bits[6] = 1;
        let u = BipolarBlock::<f64>::from_bits(&bits).unwrap();
        let want = poly.encode(&u).unwrap();
        let got = table.encode_block(u.tensor()).unwrap();
        assert_eq!(got.data(), want.tensor().data());
    }

    #[test]
    fn shape_validation() {
        let bad = Tensor::<f64>::zeros(3, 1);
        assert!(TableEncoder::new(vec![0, 1], bad).is_err());
        let ok = Tensor::<f64>::zeros(4, 1);
        assert!(TableEncoder::new(vec![1, 0], ok.clone()).is_err());
        assert!(TableEncoder::new(vec![0, 1], ok).is_ok());
    }
}
