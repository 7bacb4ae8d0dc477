//! Minimal position-by-depth matrix used for blocks, observations, and LLRs.

use crate::{Error, Result, Scalar};

/// Row-major `positions x depth` matrix. Rows index block positions, columns
/// index streams (code bits, observation dimensions, filter channels).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    data: Vec<S>,
    positions: usize,
    depth: usize,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(positions: usize, depth: usize) -> Self {
        Tensor {
            data: vec![S::zero(); positions * depth],
            positions,
            depth,
        }
    }

    pub fn from_vec(data: Vec<S>, positions: usize, depth: usize) -> Result<Self> {
        if data.len() != positions * depth {
            return Err(Error::invalid(format!(
                "tensor data length {} does not match {positions} x {depth}",
                data.len()
            )));
        }
        Ok(Tensor {
            data,
            positions,
            depth,
        })
    }

    /// Single-column tensor from a vector.
    pub fn from_column(v: Vec<S>) -> Self {
        let positions = v.len();
        Tensor {
            data: v,
            positions,
            depth: 1,
        }
    }

    pub fn from_fn(positions: usize, depth: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(positions * depth);
        for p in 0..positions {
            for d in 0..depth {
                data.push(f(p, d));
            }
        }
        Tensor {
            data,
            positions,
            depth,
        }
    }

    #[inline]
    pub fn positions(&self) -> usize {
        self.positions
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.depth
    }

    #[inline]
    pub fn at(&self, pos: usize, d: usize) -> S {
        debug_assert!(pos < self.positions && d < self.depth);
        self.data[pos * self.depth + d]
    }

    #[inline]
    pub fn at_mut(&mut self, pos: usize, d: usize) -> &mut S {
        debug_assert!(pos < self.positions && d < self.depth);
        &mut self.data[pos * self.depth + d]
    }

    #[inline]
    pub fn row(&self, pos: usize) -> &[S] {
        &self.data[pos * self.depth..(pos + 1) * self.depth]
    }

    pub fn column(&self, d: usize) -> Vec<S> {
        (0..self.positions).map(|p| self.at(p, d)).collect()
    }

    pub fn set_column(&mut self, d: usize, v: &[S]) {
        assert_eq!(v.len(), self.positions);
        for (p, &x) in v.iter().enumerate() {
            *self.at_mut(p, d) = x;
        }
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn scale(&mut self, g: S) {
        for v in &mut self.data {
            *v *= g;
        }
    }

    pub fn mean_square(&self) -> S {
        if self.data.is_empty() {
            return S::zero();
        }
        let sum: S = self.data.iter().map(|v| *v * *v).sum();
        sum / S::of(self.data.len() as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Maximum absolute entry-wise difference; tensors must share a shape.
    pub fn max_abs_diff(&self, other: &Tensor<S>) -> S {
        assert_eq!(self.positions, other.positions);
        assert_eq!(self.depth, other.depth);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs())
            .fold(S::zero(), S::max)
    }
}

/// `i mod n` mapped into `0..n` for possibly negative `i`.
#[inline]
pub(crate) fn wrap_index(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_row_major() {
        let t = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3, 2).unwrap();
        assert_eq!(t.at(0, 1), 2.0);
        assert_eq!(t.at(2, 0), 5.0);
        assert_eq!(t.row(1), &[3.0, 4.0]);
        assert_eq!(t.column(1), vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(Tensor::from_vec(vec![1.0f64; 5], 2, 2).is_err());
    }

    #[test]
    fn wrap_index_handles_negatives() {
        assert_eq!(wrap_index(-1, 8), 7);
        assert_eq!(wrap_index(-9, 8), 7);
        assert_eq!(wrap_index(8, 8), 0);
        assert_eq!(wrap_index(3, 8), 3);
    }
}
