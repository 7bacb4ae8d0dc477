use super::{BipolarBlock, PolynomialEncoder};
use crate::tensor::{wrap_index, Tensor};
use crate::{Error, Result, Scalar};

/// Packs a bipolar window (ordered lowest offset first) into a table index,
/// most significant bit first; `-1` maps to bit 1.
///
/// This is the single source of truth for window/state numbering: table
/// encoders, trellis transitions, and the analysis enumerations all use it,
/// so their indices agree by construction.
#[inline]
pub fn window_index<S: Scalar>(window: &[S]) -> usize {
    window
        .iter()
        .fold(0usize, |acc, &v| (acc << 1) | usize::from(v < S::zero()))
}

/// A circular block encoder with a bounded receptive window.
///
/// `window()` bounds which input offsets can influence one output position:
/// output `c[p]` may depend on inputs `u[p + lo ..= p + hi]` only. The bound
/// is what makes the encoder trellis-representable.
pub trait BlockEncoder<S: Scalar>: Send + Sync {
    fn input_depth(&self) -> usize;

    fn output_depth(&self) -> usize;

    /// Inclusive offset range `(lo, hi)` of inputs influencing one output.
    fn window(&self) -> (isize, isize);

    /// Number of offsets in the window.
    fn window_width(&self) -> usize {
        let (lo, hi) = self.window();
        (hi - lo + 1) as usize
    }

    /// Encodes a full circular block (`positions x input_depth` in,
    /// `positions x output_depth` out).
    fn encode_block(&self, input: &Tensor<S>) -> Result<Tensor<S>>;

    /// Output row at a single position given exactly the window of inputs
    /// that can influence it (`window-width x input_depth`).
    ///
    /// The default evaluates `encode_block` on a circular block of exactly
    /// the window width; offsets then map one-to-one onto positions, so the
    /// result equals the output inside any larger block with the same window
    /// contents.
    fn encode_window(&self, window: &Tensor<S>) -> Result<Vec<S>> {
        let (lo, hi) = self.window();
        let w = (hi - lo + 1) as usize;
        if window.positions() != w || window.depth() != self.input_depth() {
            return Err(Error::invalid(format!(
                "window must be {w} x {}, got {} x {}",
                self.input_depth(),
                window.positions(),
                window.depth()
            )));
        }
        let p = wrap_index(-lo, w);
        // Lay the window into a circular block so offset j of the output at
        // position p is window row j.
        let mut block = Tensor::zeros(w, self.input_depth());
        for j in 0..w {
            let pos = wrap_index(p as isize + lo + j as isize, w);
            for d in 0..self.input_depth() {
                *block.at_mut(pos, d) = window.at(j, d);
            }
        }
        let out = self.encode_block(&block)?;
        Ok(out.row(p).to_vec())
    }
}

impl<S: Scalar, T: BlockEncoder<S> + ?Sized> BlockEncoder<S> for &T {
    fn input_depth(&self) -> usize {
        (**self).input_depth()
    }
    fn output_depth(&self) -> usize {
        (**self).output_depth()
    }
    fn window(&self) -> (isize, isize) {
        (**self).window()
    }
    fn encode_block(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        (**self).encode_block(input)
    }
    fn encode_window(&self, window: &Tensor<S>) -> Result<Vec<S>> {
        (**self).encode_window(window)
    }
}

/// An encoder whose outputs are differentiable in its inputs.
pub trait DifferentiableEncoder<S: Scalar>: BlockEncoder<S> {
    /// Gradient of `output[out_pos, out_depth]` with respect to every input
    /// entry, as a `positions x input_depth` tensor.
    fn output_input_gradient(
        &self,
        input: &Tensor<S>,
        out_pos: usize,
        out_depth: usize,
    ) -> Result<Tensor<S>>;
}

impl<S: Scalar, T: DifferentiableEncoder<S> + ?Sized> DifferentiableEncoder<S> for &T {
    fn output_input_gradient(
        &self,
        input: &Tensor<S>,
        out_pos: usize,
        out_depth: usize,
    ) -> Result<Tensor<S>> {
        (**self).output_input_gradient(input, out_pos, out_depth)
    }
}

impl<S: Scalar> BlockEncoder<S> for PolynomialEncoder {
    fn input_depth(&self) -> usize {
        1
    }
    fn output_depth(&self) -> usize {
        1
    }
    fn window(&self) -> (isize, isize) {
        PolynomialEncoder::window(self)
    }
    fn encode_block(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        let u = BipolarBlock::new(input.clone())?;
        Ok(self.encode(&u)?.into_tensor())
    }
}

/// Several polynomial encoders over one shared input stream; output depth is
/// one column per polynomial. This is the usual outer-code shape.
#[derive(Debug, Clone)]
pub struct PolynomialBank {
    streams: Vec<PolynomialEncoder>,
}

impl PolynomialBank {
    pub fn new(streams: Vec<PolynomialEncoder>) -> Result<Self> {
        if streams.is_empty() {
            return Err(Error::invalid("polynomial bank needs at least one stream"));
        }
        Ok(PolynomialBank { streams })
    }

    pub fn from_taps(taps: &[Vec<isize>]) -> Result<Self> {
        PolynomialBank::new(
            taps.iter()
                .map(|t| PolynomialEncoder::new(t.clone()))
                .collect::<Result<_>>()?,
        )
    }

    pub fn streams(&self) -> &[PolynomialEncoder] {
        &self.streams
    }

    pub fn encode<S: Scalar>(&self, u: &BipolarBlock<S>) -> Result<BipolarBlock<S>> {
        let mut out = Tensor::zeros(u.positions(), self.streams.len());
        for (d, enc) in self.streams.iter().enumerate() {
            let c = enc.encode(u)?;
            out.set_column(d, &c.column(0));
        }
        BipolarBlock::new(out)
    }
}

impl<S: Scalar> BlockEncoder<S> for PolynomialBank {
    fn input_depth(&self) -> usize {
        1
    }
    fn output_depth(&self) -> usize {
        self.streams.len()
    }
    fn window(&self) -> (isize, isize) {
        let lo = self.streams.iter().map(|s| s.window().0).min().expect("non-empty");
        let hi = self.streams.iter().map(|s| s.window().1).max().expect("non-empty");
        (lo, hi)
    }
    fn encode_block(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        let u = BipolarBlock::new(input.clone())?;
        Ok(self.encode(&u)?.into_tensor())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_index_is_msb_first_with_minus_one_as_one() {
        assert_eq!(window_index(&[1.0, 1.0, 1.0]), 0);
        assert_eq!(window_index(&[1.0, 1.0, -1.0]), 1);
        assert_eq!(window_index(&[-1.0, 1.0, 1.0]), 4);
        assert_eq!(window_index(&[-1.0, -1.0, -1.0]), 7);
    }

    #[test]
    fn encode_window_matches_direct_product() {
        // For taps {-2, 0, 1} the window is 4 wide; the windowed output must
        // equal the product of the entries at the tap offsets.
        let enc = PolynomialEncoder::new(vec![-2, 0, 1]).unwrap();
        for idx in 0..16usize {
            let vals: Vec<f64> = (0..4)
                .map(|j| if idx >> (3 - j) & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            let window = Tensor::from_column(vals.clone());
            let out = BlockEncoder::<f64>::encode_window(&enc, &window).unwrap();
            // offsets -2,-1,0,+1 sit at rows 0..4; taps pick rows 0, 2, 3.
            assert_eq!(out, vec![vals[0] * vals[2] * vals[3]]);
        }
    }

    #[test]
    fn bank_window_is_the_union_span() {
        let bank =
            PolynomialBank::from_taps(&[vec![-2, 0, 1], vec![-1, 0, 3]]).unwrap();
        assert_eq!(BlockEncoder::<f64>::window(&bank), (-2, 3));
        assert_eq!(BlockEncoder::<f64>::output_depth(&bank), 2);
    }
}
