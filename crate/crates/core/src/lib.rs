//! Soft-decision trellis toolkit for finite-memory binary-input encoders.
//!
//! The crate covers the full receive-side workflow for codes whose encoders
//! have a bounded receptive window: estimating that window from black-box
//! encoders ([`analysis`]), compiling encoders into trellises ([`trellis`]),
//! running tail-biting BCJR and serial turbo decoding over AWGN observations
//! ([`bcjr`], [`turbo`]), Monte-Carlo link simulation ([`sim`]), and
//! gradient-based training of convolutional-network encoders *through* the
//! classical decoder ([`cnn`], [`tune`]).
//!
//! Conventions used throughout:
//!
//! * Bits are bipolar: the field element 0 maps to `+1.0`, 1 maps to `-1.0`,
//!   so XOR becomes multiplication.
//! * LLRs are natural-log ratios with `L > 0` favouring the bit `+1`.
//! * All block operations are circular (tail-biting); position arithmetic is
//!   modulo the block length.
//!
//! Numeric kernels are generic over the [`Scalar`] floating-point type;
//! `f64` is the default and the type the documented tolerances assume.
//! Concrete double-precision aliases are exported at the crate root.

pub mod analysis;
pub mod bcjr;
pub mod cnn;
pub mod codes;
pub mod sim;
pub mod system;
pub mod tensor;
pub mod trellis;
pub mod tune;
pub mod turbo;

mod error;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision position-by-depth matrix.
pub type Tensor64 = tensor::Tensor<f64>;
/// Double-precision bipolar block.
pub type Block64 = codes::BipolarBlock<f64>;
/// Double-precision convolutional network.
pub type CnnModel64 = cnn::CnnModel<f64>;
/// Double-precision trellis.
pub type Trellis64 = trellis::Trellis<f64>;
/// Double-precision coded link (encoder chain plus turbo decoder).
pub type CodedSystem64 = system::CodedSystem<f64>;
