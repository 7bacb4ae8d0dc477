use crate::codes::BipolarBlock;
use crate::tensor::{wrap_index, Tensor};
use crate::{Error, Result, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pointwise activation applied after a convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// `x` for `x > 0`, `exp(x) - 1` otherwise.
    Elu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Elu => {
                if x > S::zero() {
                    x
                } else {
                    x.exp() - S::one()
                }
            }
            Activation::Linear => x,
        }
    }

    /// Derivative evaluated at the pre-activation value.
    #[inline]
    pub fn derivative<S: Scalar>(self, pre: S) -> S {
        match self {
            Activation::Elu => {
                if pre > S::zero() {
                    S::one()
                } else {
                    pre.exp()
                }
            }
            Activation::Linear => S::one(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Elu => "elu",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "elu" => Ok(Activation::Elu),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::Parse(format!("unknown activation {other:?}"))),
        }
    }
}

/// One circular convolution layer.
///
/// `kernel[id][od][j]` multiplies input channel `id` at offset `j - (k-1)/2`
/// when producing output channel `od`; stored flat as
/// `((id * out_depth) + od) * kernel_size + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<S> {
    pub(crate) kernel: Vec<S>,
    pub(crate) bias: Vec<S>,
    pub(crate) in_depth: usize,
    pub(crate) out_depth: usize,
    pub(crate) kernel_size: usize,
    pub(crate) activation: Activation,
}

impl<S: Scalar> ConvLayer<S> {
    pub fn new(
        kernel: Vec<S>,
        bias: Vec<S>,
        in_depth: usize,
        out_depth: usize,
        kernel_size: usize,
        activation: Activation,
    ) -> Result<Self> {
        if in_depth == 0 || out_depth == 0 {
            return Err(Error::invalid("layer depths must be positive"));
        }
        if kernel_size == 0 || kernel_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "kernel size must be odd and positive, got {kernel_size}"
            )));
        }
        if kernel.len() != in_depth * out_depth * kernel_size {
            return Err(Error::invalid(format!(
                "kernel needs {} weights, got {}",
                in_depth * out_depth * kernel_size,
                kernel.len()
            )));
        }
        if bias.len() != out_depth {
            return Err(Error::invalid(format!(
                "bias needs {out_depth} entries, got {}",
                bias.len()
            )));
        }
        if kernel.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("layer weights must be finite".into()));
        }
        Ok(ConvLayer {
            kernel,
            bias,
            in_depth,
            out_depth,
            kernel_size,
            activation,
        })
    }

    pub fn in_depth(&self) -> usize {
        self.in_depth
    }
    pub fn out_depth(&self) -> usize {
        self.out_depth
    }
    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }
    pub fn activation(&self) -> Activation {
        self.activation
    }
    pub fn kernel(&self) -> &[S] {
        &self.kernel
    }
    pub fn bias(&self) -> &[S] {
        &self.bias
    }

    #[inline]
    fn k_at(&self, id: usize, od: usize, j: usize) -> S {
        self.kernel[(id * self.out_depth + od) * self.kernel_size + j]
    }

    fn forward_into(&self, input: &Tensor<S>, pre: &mut Tensor<S>, post: &mut Tensor<S>) {
        let n = input.positions();
        let h = (self.kernel_size / 2) as isize;
        for i in 0..n {
            for od in 0..self.out_depth {
                let mut acc = self.bias[od];
                for j in 0..self.kernel_size {
                    let pos = wrap_index(i as isize + j as isize - h, n);
                    for id in 0..self.in_depth {
                        acc += self.k_at(id, od, j) * input.at(pos, id);
                    }
                }
                *pre.at_mut(i, od) = acc;
                *post.at_mut(i, od) = self.activation.apply(acc);
            }
        }
    }
}

/// Intermediate values saved by [`CnnModel::forward_trace`] for the
/// backward pass: each layer's input and pre-activation tensors.
#[derive(Debug, Clone)]
pub struct ForwardTrace<S> {
    pub(crate) layer_inputs: Vec<Tensor<S>>,
    pub(crate) pre_activations: Vec<Tensor<S>>,
    pub(crate) output: Tensor<S>,
}

impl<S: Scalar> ForwardTrace<S> {
    pub fn output(&self) -> &Tensor<S> {
        &self.output
    }
}

/// Per-layer parameter gradients, shaped like the model's parameters.
#[derive(Debug, Clone)]
pub struct CnnGrads<S> {
    pub kernels: Vec<Vec<S>>,
    pub biases: Vec<Vec<S>>,
}

impl<S: Scalar> CnnGrads<S> {
    fn zeros_like(model: &CnnModel<S>) -> Self {
        CnnGrads {
            kernels: model.layers.iter().map(|l| vec![S::zero(); l.kernel.len()]).collect(),
            biases: model.layers.iter().map(|l| vec![S::zero(); l.bias.len()]).collect(),
        }
    }

    /// Flattens in the same order as [`CnnModel::flatten_params`].
    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::new();
        for (k, b) in self.kernels.iter().zip(&self.biases) {
            out.extend_from_slice(k);
            out.extend_from_slice(b);
        }
        out
    }
}

/// Stack of circular convolution layers with matching depths.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel<S> {
    layers: Vec<ConvLayer<S>>,
}

impl<S: Scalar> CnnModel<S> {
    pub fn new(layers: Vec<ConvLayer<S>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("model needs at least one layer"));
        }
        for w in layers.windows(2) {
            if w[0].out_depth != w[1].in_depth {
                return Err(Error::invalid(format!(
                    "layer depth mismatch: {} out feeds {} in",
                    w[0].out_depth, w[1].in_depth
                )));
            }
        }
        Ok(CnnModel { layers })
    }

    /// Random model: uniform `+-1/sqrt(in_depth * kernel)` weights, zero
    /// biases, ELU on hidden layers and a linear output layer.
    pub fn random(
        in_depth: usize,
        hidden_depth: usize,
        out_depth: usize,
        num_layers: usize,
        kernel_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if num_layers == 0 {
            return Err(Error::invalid("model needs at least one layer"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            let id = if l == 0 { in_depth } else { hidden_depth };
            let od = if l + 1 == num_layers { out_depth } else { hidden_depth };
            let act = if l + 1 == num_layers {
                Activation::Linear
            } else {
                Activation::Elu
            };
            let bound = 1.0 / ((id * kernel_size) as f64).sqrt();
            let kernel: Vec<S> = (0..id * od * kernel_size)
                .map(|_| S::of(rng.gen_range(-bound..bound)))
                .collect();
            layers.push(ConvLayer::new(kernel, vec![S::zero(); od], id, od, kernel_size, act)?);
        }
        CnnModel::new(layers)
    }

    pub fn layers(&self) -> &[ConvLayer<S>] {
        &self.layers
    }

    pub fn in_depth(&self) -> usize {
        self.layers[0].in_depth
    }

    pub fn out_depth(&self) -> usize {
        self.layers.last().expect("non-empty").out_depth
    }

    /// Receptive field in positions: `sum(kernel_size - 1) + 1`. Always odd.
    pub fn receptive_field(&self) -> usize {
        self.layers.iter().map(|l| l.kernel_size - 1).sum::<usize>() + 1
    }

    pub fn forward(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(self.forward_trace(input)?.output)
    }

    /// Forward pass that keeps every layer's input and pre-activation for a
    /// later backward pass.
    pub fn forward_trace(&self, input: &Tensor<S>) -> Result<ForwardTrace<S>> {
        if input.depth() != self.in_depth() {
            return Err(Error::invalid(format!(
                "model expects {} input streams, got {}",
                self.in_depth(),
                input.depth()
            )));
        }
        if input.positions() == 0 {
            return Err(Error::invalid("input block must be non-empty"));
        }
        if !input.is_finite() {
            return Err(Error::Degenerate("model input must be finite".into()));
        }
        let n = input.positions();
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for layer in &self.layers {
            let mut pre = Tensor::zeros(n, layer.out_depth);
            let mut post = Tensor::zeros(n, layer.out_depth);
            layer.forward_into(&current, &mut pre, &mut post);
            layer_inputs.push(current);
            pre_activations.push(pre);
            current = post;
        }
        Ok(ForwardTrace {
            layer_inputs,
            pre_activations,
            output: current,
        })
    }

    /// Reverse pass from a gradient in the output tensor; returns parameter
    /// gradients and the gradient in the model input.
    pub fn backward(&self, trace: &ForwardTrace<S>, out_delta: &Tensor<S>) -> (CnnGrads<S>, Tensor<S>) {
        assert_eq!(out_delta.positions(), trace.output.positions());
        assert_eq!(out_delta.depth(), trace.output.depth());
        let n = out_delta.positions();
        let mut grads = CnnGrads::zeros_like(self);
        let mut delta = out_delta.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.layer_inputs[l];
            let pre = &trace.pre_activations[l];
            let h = (layer.kernel_size / 2) as isize;
            let mut delta_in = Tensor::zeros(n, layer.in_depth);
            for i in 0..n {
                for od in 0..layer.out_depth {
                    let dpre = delta.at(i, od) * layer.activation.derivative(pre.at(i, od));
                    if dpre == S::zero() {
                        continue;
                    }
                    grads.biases[l][od] += dpre;
                    for j in 0..layer.kernel_size {
                        let pos = wrap_index(i as isize + j as isize - h, n);
                        for id in 0..layer.in_depth {
                            let kidx = (id * layer.out_depth + od) * layer.kernel_size + j;
                            grads.kernels[l][kidx] += dpre * input.at(pos, id);
                            *delta_in.at_mut(pos, id) += dpre * layer.kernel[kidx];
                        }
                    }
                }
            }
            delta = delta_in;
        }
        (grads, delta)
    }

    /// Gradient of one output entry with respect to every input entry.
    ///
    /// Entries outside the receptive field of `out_pos` are exactly zero.
    pub fn input_gradient(
        &self,
        input: &Tensor<S>,
        out_pos: usize,
        out_depth: usize,
    ) -> Result<Tensor<S>> {
        if out_depth >= self.out_depth() {
            return Err(Error::invalid("output stream index out of range"));
        }
        if out_pos >= input.positions() {
            return Err(Error::invalid("output position out of range"));
        }
        let trace = self.forward_trace(input)?;
        let mut seed = Tensor::zeros(input.positions(), self.out_depth());
        *seed.at_mut(out_pos, out_depth) = S::one();
        Ok(self.backward(&trace, &seed).1)
    }

    /// Parameter gradients for an upstream gradient over the whole output.
    pub fn weight_gradient(&self, input: &Tensor<S>, upstream: &Tensor<S>) -> Result<CnnGrads<S>> {
        if upstream.depth() != self.out_depth() || upstream.positions() != input.positions() {
            return Err(Error::invalid("upstream gradient shape must match the output"));
        }
        let trace = self.forward_trace(input)?;
        Ok(self.backward(&trace, upstream).0)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.kernel.len() + l.bias.len()).sum()
    }

    /// Kernel-then-bias concatenation, layer by layer.
    pub fn flatten_params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.kernel);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Inverse of [`CnnModel::flatten_params`].
    pub fn set_params(&mut self, params: &[S]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("parameters must be finite".into()));
        }
        let mut at = 0usize;
        for l in &mut self.layers {
            let nk = l.kernel.len();
            l.kernel.copy_from_slice(&params[at..at + nk]);
            at += nk;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }
}

/// Sign quantizer mapping to bipolar symbols; zero resolves to `+1`.
pub fn binarize<S: Scalar>(x: &Tensor<S>) -> BipolarBlock<S> {
    let t = Tensor::from_fn(x.positions(), x.depth(), |p, d| {
        if x.at(p, d) < S::zero() {
            -S::one()
        } else {
            S::one()
        }
    });
    BipolarBlock::new(t).expect("signs are bipolar")
}

/// Saturated straight-through surrogate gradient for [`binarize`]: passes
/// the upstream gradient where `|x| < 1` and blocks it elsewhere.
pub fn binarize_backward<S: Scalar>(x: &Tensor<S>, upstream: &Tensor<S>) -> Tensor<S> {
    assert_eq!(x.positions(), upstream.positions());
    assert_eq!(x.depth(), upstream.depth());
    Tensor::from_fn(x.positions(), x.depth(), |p, d| {
        if x.at(p, d).abs() < S::one() {
            upstream.at(p, d)
        } else {
            S::zero()
        }
    })
}
