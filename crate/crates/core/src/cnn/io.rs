//! Versioned JSON weight files.
//!
//! Doubles survive the JSON round trip bit-exactly (shortest-round-trip
//! float formatting), so save/load is lossless for `f64` models.

use super::{Activation, CnnModel, ConvLayer};
use crate::{Error, Result, Scalar};
use serde::{Deserialize, Serialize};
use std::path::Path;

const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    version: u32,
    layers: Vec<LayerRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    in_depth: usize,
    out_depth: usize,
    kernel_size: usize,
    activation: String,
    kernel: Vec<f64>,
    bias: Vec<f64>,
}

pub fn save_weights<S: Scalar>(model: &CnnModel<S>, path: &Path) -> Result<()> {
    let file = WeightsFile {
        version: WEIGHTS_VERSION,
        layers: model
            .layers()
            .iter()
            .map(|l| LayerRecord {
                in_depth: l.in_depth(),
                out_depth: l.out_depth(),
                kernel_size: l.kernel_size(),
                activation: l.activation().name().to_string(),
                kernel: l.kernel().iter().map(|&v| v.to64()).collect(),
                bias: l.bias().iter().map(|&v| v.to64()).collect(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_weights<S: Scalar>(path: &Path) -> Result<CnnModel<S>> {
    let text = std::fs::read_to_string(path)?;
    let file: WeightsFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if file.version != WEIGHTS_VERSION {
        return Err(Error::Parse(format!(
            "weight file version {} is not supported (expected {WEIGHTS_VERSION})",
            file.version
        )));
    }
    let layers = file
        .layers
        .into_iter()
        .map(|l| {
            ConvLayer::new(
                l.kernel.iter().map(|&v| S::of(v)).collect(),
                l.bias.iter().map(|&v| S::of(v)).collect(),
                l.in_depth,
                l.out_depth,
                l.kernel_size,
                Activation::parse(&l.activation)?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    CnnModel::new(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.json");
        let model = CnnModel::<f64>::random(2, 5, 2, 3, 3, 1234).unwrap();
        save_weights(&model, &path).unwrap();
        let back: CnnModel<f64> = load_weights(&path).unwrap();
        assert_eq!(model.flatten_params(), back.flatten_params());
        assert_eq!(model.layers().len(), back.layers().len());
    }

    #[test]
    fn truncated_and_mismatched_files_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.json");
        std::fs::write(&path, "{\"version\":1,\"layers\":[{\"in_depth\":1").unwrap();
        assert!(matches!(load_weights::<f64>(&path), Err(Error::Parse(_))));

        // Declared kernel size disagrees with the weight count.
        std::fs::write(
            &path,
            r#"{"version":1,"layers":[{"in_depth":1,"out_depth":1,"kernel_size":3,
                "activation":"linear","kernel":[1.0,2.0],"bias":[0.0]}]}"#,
        )
        .unwrap();
        assert!(load_weights::<f64>(&path).is_err());

        // Future version.
        std::fs::write(&path, r#"{"version":9,"layers":[]}"#).unwrap();
        assert!(matches!(load_weights::<f64>(&path), Err(Error::Parse(_))));
    }
}
