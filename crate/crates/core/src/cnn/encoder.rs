use super::{binarize, binarize_backward, CnnModel};
use crate::codes::{BlockEncoder, DifferentiableEncoder};
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

/// A convolutional network viewed as a finite-window block encoder, with an
/// optional sign quantizer on its outputs.
///
/// The window is the centered receptive field; the quantized variant stays
/// differentiable through the saturated straight-through surrogate.
#[derive(Debug, Clone)]
pub struct CnnEncoder<S> {
    model: CnnModel<S>,
    binarized: bool,
}

impl<S: Scalar> CnnEncoder<S> {
    pub fn new(model: CnnModel<S>, binarized: bool) -> Self {
        CnnEncoder { model, binarized }
    }

    pub fn model(&self) -> &CnnModel<S> {
        &self.model
    }

    pub fn binarized(&self) -> bool {
        self.binarized
    }
}

impl<S: Scalar> BlockEncoder<S> for CnnEncoder<S> {
    fn input_depth(&self) -> usize {
        self.model.in_depth()
    }

    fn output_depth(&self) -> usize {
        self.model.out_depth()
    }

    fn window(&self) -> (isize, isize) {
        let half = (self.model.receptive_field() / 2) as isize;
        (-half, half)
    }

    fn encode_block(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        let n = input.positions();
        if n < self.model.receptive_field() {
            return Err(Error::invalid(format!(
                "block length {n} is shorter than the receptive field {}",
                self.model.receptive_field()
            )));
        }
        let out = self.model.forward(input)?;
        Ok(if self.binarized {
            binarize(&out).into_tensor()
        } else {
            out
        })
    }
}

impl<S: Scalar> DifferentiableEncoder<S> for CnnEncoder<S> {
    fn output_input_gradient(
        &self,
        input: &Tensor<S>,
        out_pos: usize,
        out_depth: usize,
    ) -> Result<Tensor<S>> {
        if !self.binarized {
            return self.model.input_gradient(input, out_pos, out_depth);
        }
        // Chain the straight-through gate at the selected output entry.
        let raw = self.model.forward(input)?;
        let mut seed = Tensor::zeros(input.positions(), self.model.out_depth());
        *seed.at_mut(out_pos, out_depth) = S::one();
        let gated = binarize_backward(&raw, &seed);
        let trace = self.model.forward_trace(input)?;
        Ok(self.model.backward(&trace, &gated).1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_centered_receptive_field() {
        let enc = CnnEncoder::new(CnnModel::<f64>::random(1, 3, 1, 2, 3, 0).unwrap(), false);
        assert_eq!(enc.window(), (-2, 2));
    }

    #[test]
    fn binarized_outputs_are_bipolar() {
        let enc = CnnEncoder::new(CnnModel::<f64>::random(1, 3, 2, 2, 3, 5).unwrap(), true);
        let x = Tensor::from_fn(8, 1, |p, _| if p % 2 == 0 { 1.0 } else { -1.0 });
        let y = enc.encode_block(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn short_blocks_are_rejected() {
        let enc = CnnEncoder::new(CnnModel::<f64>::random(1, 3, 1, 3, 5, 0).unwrap(), false);
        let x = Tensor::<f64>::zeros(8, 1);
        assert!(enc.encode_block(&x).is_err());
    }

    #[test]
    fn gradient_outside_receptive_field_is_zero() {
        let enc = CnnEncoder::new(CnnModel::<f64>::random(1, 4, 1, 2, 3, 9).unwrap(), false);
        let n = 16;
        let x = Tensor::from_fn(n, 1, |p, _| ((p * 13 % 7) as f64 - 3.0) / 3.0);
        let g = enc.output_input_gradient(&x, 8, 0).unwrap();
        for p in 0..n {
            let off = (p as isize - 8).rem_euclid(n as isize);
            let inside = off <= 2 || off >= n as isize - 2;
            if !inside {
                assert_eq!(g.at(p, 0), 0.0, "position {p} is outside the window");
            }
        }
    }
}
