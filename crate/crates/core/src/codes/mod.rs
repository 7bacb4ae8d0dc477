//! Bit-domain primitives: bipolar blocks, circular encoders, interleavers,
//! power normalization, and single-parity-check post-processing.
//!
//! Everything here follows the bipolar convention (field element 0 is `+1`,
//! 1 is `-1`, XOR is multiplication) and treats blocks as circular.

mod bipolar;
mod encoder;
mod interleave;
mod norm;
mod poly;
mod spc;
mod spec_io;
mod table;

pub use bipolar::BipolarBlock;
pub use encoder::{window_index, BlockEncoder, DifferentiableEncoder, PolynomialBank};
pub use interleave::{Interleaver, InterleaverKind};
pub use norm::{normalize_power, normalize_power_backward};
pub use poly::PolynomialEncoder;
pub use spc::{spc_correct, spc_encode, spc_rate_shift_db};
pub use spec_io::{EncoderSpec, InterleaverSpec};
pub use table::TableEncoder;
