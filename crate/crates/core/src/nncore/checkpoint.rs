//! Binary checkpoint container:
//!
//! ```text
//! magic "SGCK" | u32 LE header length | JSON header | f64 LE parameters | u32 LE CRC-32
//! ```
//!
//! The header carries `format_version`, the model kind, the layer specs in
//! order, the seed and free-form metadata. Parameters follow in layer order,
//! each layer's groups in its `params()` order. The CRC covers every
//! preceding byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, DropoutLayer, LstmLayer};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SGCK";

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    Dropout(DropoutLayer),
    Lstm(LstmLayer),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub seed: u64,
    pub layers: Vec<Layer>,
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
    },
    Dropout {
        rate: f64,
    },
    Lstm {
        input_dim: usize,
        hidden: usize,
    },
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    kind: String,
    seed: u64,
    layers: Vec<LayerSpec>,
    param_count: usize,
    meta: serde_json::Value,
}

fn layer_params(layer: &Layer) -> Vec<&[f64]> {
    match layer {
        Layer::Dense(d) => vec![&d.weights, &d.bias],
        Layer::Dropout(_) => Vec::new(),
        Layer::Lstm(l) => l.params(),
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let specs = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => LayerSpec::Dense {
                    inputs: d.inputs,
                    outputs: d.outputs,
                    activation: d.activation,
                },
                Layer::Dropout(d) => LayerSpec::Dropout { rate: d.rate },
                Layer::Lstm(l) => LayerSpec::Lstm {
                    input_dim: l.input_dim,
                    hidden: l.hidden,
                },
            })
            .collect();
        let params: Vec<f64> = self
            .layers
            .iter()
            .flat_map(|l| layer_params(l).into_iter().flatten().copied().collect::<Vec<_>>())
            .collect();
        let header = Header {
            format_version: FORMAT_VERSION,
            kind: self.kind.clone(),
            seed: self.seed,
            layers: specs,
            param_count: params.len(),
            meta: self.meta.clone(),
        };
        let header = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(12 + header.len() + params.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let header_end = 8usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[8..header_end])
            .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: header.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let expected_len = header_end + header.param_count * 8 + 4;
        if bytes.len() != expected_len {
            return Err(Error::Checkpoint(format!(
                "expected {expected_len} bytes, found {} (truncated or corrupt)",
                bytes.len()
            )));
        }
        let body_end = bytes.len() - 4;
        let stored = u32::from_le_bytes(bytes[body_end..].try_into().unwrap());
        if crc32fast::hash(&bytes[..body_end]) != stored {
            return Err(bad("checksum mismatch"));
        }
        let mut values = bytes[header_end..body_end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = values.by_ref().take(n).collect();
            if v.len() != n {
                return Err(bad("parameter count does not match layer specs"));
            }
            Ok(v)
        };
        let mut layers = Vec::with_capacity(header.layers.len());
        for spec in header.layers {
            layers.push(match spec {
                LayerSpec::Dense {
                    inputs,
                    outputs,
                    activation,
                } => {
                    let w = take(inputs * outputs)?;
                    let b = take(outputs)?;
                    Layer::Dense(DenseLayer::from_parts(inputs, outputs, w, b, activation)?)
                }
                LayerSpec::Dropout { rate } => Layer::Dropout(DropoutLayer::new(rate)?),
                LayerSpec::Lstm { input_dim, hidden } => {
                    let layer = LstmLayer {
                        input_dim,
                        hidden,
                        w_input: take(4 * hidden * input_dim)?,
                        w_hidden: take(4 * hidden * hidden)?,
                        bias: take(4 * hidden)?,
                    };
                    Layer::Lstm(layer)
                }
            });
        }
        if values.next().is_some() {
            return Err(bad("parameter count does not match layer specs"));
        }
        Ok(Checkpoint {
            kind: header.kind,
            seed: header.seed,
            layers,
            meta: header.meta,
        })
    }
}

pub fn write_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::rng_from_seed;

    fn sample() -> Checkpoint {
        let mut rng = rng_from_seed(3);
        Checkpoint {
            kind: "test".into(),
            seed: 3,
            layers: vec![
                Layer::Lstm(LstmLayer::new(3, 2, &mut rng)),
                Layer::Dropout(DropoutLayer::new(0.4).unwrap()),
                Layer::Dense(DenseLayer::new(2, 1, Activation::Sigmoid, &mut rng)),
            ],
            meta: serde_json::json!({"width": 7}),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = sample().to_bytes().unwrap();
        for cut in [3, 10, bytes.len() - 9, bytes.len() - 1] {
            assert!(Checkpoint::from_bytes(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        let n = flipped.len();
        flipped[n - 10] ^= 0x40;
        assert!(matches!(
            Checkpoint::from_bytes(&flipped),
            Err(Error::Checkpoint(m)) if m.contains("checksum")
        ));
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let bytes = sample().to_bytes().unwrap();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        assert!(text.contains("\"format_version\":1"));
        let pos = bytes
            .windows(18)
            .position(|w| w == b"\"format_version\":1")
            .unwrap();
        let mut patched = bytes.clone();
        patched[pos + 17] = b'7';
        assert!(matches!(
            Checkpoint::from_bytes(&patched),
            Err(Error::UnsupportedVersion { found: 7, expected: 1 })
        ));
    }
}
