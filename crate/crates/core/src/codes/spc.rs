use super::BipolarBlock;
use crate::{Error, Result, Scalar};

/// Appends a single parity symbol so the block product is `+1`
/// (even overall parity in the bit domain).
pub fn spc_encode<S: Scalar>(info: &BipolarBlock<S>) -> Result<BipolarBlock<S>> {
    if info.depth() != 1 {
        return Err(Error::invalid("parity extension takes a single stream"));
    }
    if info.positions() == 0 {
        return Err(Error::invalid("cannot extend an empty block"));
    }
    let mut data = info.column(0);
    let parity = data.iter().fold(S::one(), |acc, &v| acc * v);
    data.push(parity);
    BipolarBlock::new(crate::tensor::Tensor::from_column(data))
}

/// Hard-decides LLRs for a parity-extended block and, when the decisions
/// violate parity, flips the least reliable one (smallest `|LLR|`, lowest
/// index on ties).
///
/// A parity-consistent decision vector is returned unchanged, so the
/// correction can only remove violations, never introduce them.
pub fn spc_correct<S: Scalar>(llrs: &[S]) -> Result<BipolarBlock<S>> {
    if llrs.len() < 2 {
        return Err(Error::invalid("parity correction needs at least two symbols"));
    }
    if llrs.iter().any(|l| !l.is_finite()) {
        return Err(Error::Degenerate("LLRs must be finite".into()));
    }
    let mut decisions = BipolarBlock::hard_decide(llrs).column(0);
    let parity = decisions.iter().fold(S::one(), |acc, &v| acc * v);
    if parity < S::zero() {
        let mut weakest = 0usize;
        for (i, &l) in llrs.iter().enumerate() {
            if l.abs() < llrs[weakest].abs() {
                weakest = i;
            }
        }
        decisions[weakest] = -decisions[weakest];
    }
    BipolarBlock::new(crate::tensor::Tensor::from_column(decisions))
}

/// Rate penalty of carrying the parity symbol, in dB:
/// `10 log10((k - 1) / k)` for a corrected block of length `k`.
///
/// Reported alongside comparisons against parity-free baselines; never
/// applied to simulated operating points automatically.
pub fn spc_rate_shift_db(block_len: usize) -> Result<f64> {
    if block_len < 2 {
        return Err(Error::invalid("rate shift needs a block of at least two symbols"));
    }
    Ok(10.0 * ((block_len as f64 - 1.0) / block_len as f64).log10())
}
