use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How an interleaver permutation was generated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterleaverKind {
    /// `pi(i) = (a*i + b) mod N` with `gcd(a, N) = 1`.
    Linear { a: usize, b: usize },
    /// Seeded Fisher-Yates shuffle.
    Random { seed: u64 },
}

/// Position permutation applied uniformly across all streams of a block.
///
/// `interleave` writes input position `i` to output position `pi(i)`;
/// `deinterleave` inverts it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    kind: InterleaverKind,
    perm: Vec<usize>,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Interleaver {
    pub fn linear(n: usize, a: usize, b: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("interleaver length must be positive"));
        }
        if a == 0 || gcd(a % n.max(1), n) != 1 {
            return Err(Error::invalid(format!(
                "linear interleaver slope {a} is not coprime with length {n}"
            )));
        }
        let perm = (0..n).map(|i| (a * i + b) % n).collect();
        Ok(Interleaver {
            kind: InterleaverKind::Linear { a, b },
            perm,
        })
    }

    /// Default linear interleaver: the largest slope below `N/2` coprime
    /// with `N` (falling back to 1 for tiny blocks), offset 0.
    pub fn linear_default(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("interleaver length must be positive"));
        }
        let a = (1..n.div_ceil(2))
            .rev()
            .find(|&a| gcd(a, n) == 1)
            .unwrap_or(1);
        Interleaver::linear(n, a, 0)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Interleaver::linear(n, 1, 0)
    }

    pub fn random(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("interleaver length must be positive"));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        perm.shuffle(&mut rng);
        Ok(Interleaver {
            kind: InterleaverKind::Random { seed },
            perm,
        })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn kind(&self) -> &InterleaverKind {
        &self.kind
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.perm.len() {
            return Err(Error::invalid(format!(
                "interleaver length {} does not match block length {n}",
                self.perm.len()
            )));
        }
        Ok(())
    }

    /// `out[pi(i), d] = in[i, d]` for every stream `d`.
    pub fn interleave<S: Scalar>(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        self.check_len(x.positions())?;
        let mut out = Tensor::zeros(x.positions(), x.depth());
        for (i, &pi) in self.perm.iter().enumerate() {
            for d in 0..x.depth() {
                *out.at_mut(pi, d) = x.at(i, d);
            }
        }
        Ok(out)
    }

    /// Inverse of [`Interleaver::interleave`].
    pub fn deinterleave<S: Scalar>(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        self.check_len(x.positions())?;
        let mut out = Tensor::zeros(x.positions(), x.depth());
        for (i, &pi) in self.perm.iter().enumerate() {
            for d in 0..x.depth() {
                *out.at_mut(i, d) = x.at(pi, d);
            }
        }
        Ok(out)
    }
}
