//! On-disk descriptions of encoders and interleavers (JSON).

use super::{Interleaver, PolynomialBank, PolynomialEncoder, TableEncoder};
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Serializable encoder description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderSpec {
    /// Single polynomial stream.
    Polynomial { taps: Vec<isize> },
    /// One polynomial per output stream over a shared input.
    PolynomialBank { streams: Vec<Vec<isize>> },
    /// Explicit window-indexed lookup table (row numbering per
    /// [`super::window_index`]).
    Table {
        window_offsets: Vec<isize>,
        /// `2^offsets` rows, one inner vector per row.
        outputs: Vec<Vec<f64>>,
    },
}

impl EncoderSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn build_bank(&self) -> Result<PolynomialBank> {
        match self {
            EncoderSpec::Polynomial { taps } => {
                PolynomialBank::new(vec![PolynomialEncoder::new(taps.clone())?])
            }
            EncoderSpec::PolynomialBank { streams } => PolynomialBank::from_taps(streams),
            EncoderSpec::Table { .. } => Err(Error::invalid(
                "table specs do not describe a polynomial bank",
            )),
        }
    }

    pub fn build_table<S: Scalar>(&self) -> Result<TableEncoder<S>> {
        match self {
            EncoderSpec::Table {
                window_offsets,
                outputs,
            } => {
                let rows = outputs.len();
                let depth = outputs.first().map_or(0, Vec::len);
                if depth == 0 || outputs.iter().any(|r| r.len() != depth) {
                    return Err(Error::Parse("table rows must share a positive width".into()));
                }
                let data: Vec<S> = outputs.iter().flatten().map(|&v| S::of(v)).collect();
                TableEncoder::new(window_offsets.clone(), Tensor::from_vec(data, rows, depth)?)
            }
            _ => Err(Error::invalid("spec does not describe a table encoder")),
        }
    }
}

/// Serializable interleaver description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterleaverSpec {
    Identity,
    /// Largest slope below `N/2` coprime with `N`, offset 0.
    LinearDefault,
    Linear { a: usize, b: usize },
    Random { seed: u64 },
}

impl InterleaverSpec {
    pub fn build(&self, n: usize) -> Result<Interleaver> {
        match *self {
            InterleaverSpec::Identity => Interleaver::identity(n),
            InterleaverSpec::LinearDefault => Interleaver::linear_default(n),
            InterleaverSpec::Linear { a, b } => Interleaver::linear(n, a, b),
            InterleaverSpec::Random { seed } => Interleaver::random(n, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_spec_roundtrips_through_json() {
        let spec = EncoderSpec::PolynomialBank {
            streams: vec![vec![-2, 0, 1], vec![-1, 0, 3]],
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back: EncoderSpec = serde_json::from_str(&text).unwrap();
        let bank = back.build_bank().unwrap();
        assert_eq!(bank.streams().len(), 2);
        assert_eq!(bank.streams()[0].taps(), &[-2, 0, 1]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"kind":"polynomial","taps":[0,1],"extra":3}"#;
        assert!(serde_json::from_str::<EncoderSpec>(text).is_err());
    }

    #[test]
    fn interleaver_specs_build() {
        assert_eq!(
            InterleaverSpec::Identity.build(5).unwrap().permutation(),
            &[0, 1, 2, 3, 4]
        );
        let lin = InterleaverSpec::Linear { a: 3, b: 0 }.build(8).unwrap();
        assert_eq!(lin.permutation()[1], 3);
    }
}
