//! Circular 1-D convolutional networks with hand-rolled reverse-mode
//! differentiation, plus the saturated straight-through binarizer.
//!
//! Circular padding makes every model here shift-equivariant and gives each
//! output a receptive field of `sum(kernel - 1) + 1` positions, which is what
//! lets the analysis module treat a network as a finite-window encoder.

mod encoder;
mod io;
mod model;

pub use encoder::CnnEncoder;
pub use io::{load_weights, save_weights};
pub use model::{
    binarize, binarize_backward, Activation, CnnGrads, CnnModel, ConvLayer, ForwardTrace,
};
