//! Model checkpoints: canonical JSON with every parameter tensor by name.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Mode;
use crate::canonical::to_canonical_writer;
use crate::nets::{Architecture, Model};
use crate::numeric::{AdamState, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported checkpoint schema_version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint tensor {name}: {reason}")]
    Tensor { name: String, reason: String },
}

/// A trained model together with the mode it was trained for.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub mode: Mode,
    pub model: Model,
    pub adam: Option<AdamState>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedTensor {
    data: Vec<f64>,
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    adam: Option<AdamState>,
    architecture: Architecture,
    mode: Mode,
    schema_version: u32,
    tensors: Vec<NamedTensor>,
}

/// Writes keys in sorted order at every level.
pub fn write_checkpoint<W: Write>(state: &ModelState, writer: W) -> Result<(), CheckpointError> {
    let file = CheckpointFile {
        adam: state.adam.clone(),
        architecture: state.model.arch.clone(),
        mode: state.mode,
        schema_version: CHECKPOINT_VERSION,
        tensors: state
            .model
            .named_tensors()
            .into_iter()
            .map(|(name, t)| NamedTensor {
                data: t.data().to_vec(),
                name,
                shape: [t.rows(), t.cols()],
            })
            .collect(),
    };
    to_canonical_writer(writer, &serde_json::to_value(&file)?)?;
    Ok(())
}

pub fn read_checkpoint(text: &str) -> Result<ModelState, CheckpointError> {
    let file: CheckpointFile = serde_json::from_str(text)?;
    if file.schema_version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version {
            found: file.schema_version,
            expected: CHECKPOINT_VERSION,
        });
    }
    // Build a model of the right shapes, then overwrite every tensor by name.
    let mut model = Model::init(file.architecture.clone(), &mut ChaCha8Rng::seed_from_u64(0));
    let names: Vec<String> = model.named_tensors().into_iter().map(|(n, _)| n).collect();
    if file.tensors.len() != names.len() {
        return Err(CheckpointError::Tensor {
            name: "*".into(),
            reason: format!(
                "expected {} tensors, found {}",
                names.len(),
                file.tensors.len()
            ),
        });
    }
    for ((slot, name), rec) in model
        .tensors_mut()
        .into_iter()
        .zip(&names)
        .zip(file.tensors)
    {
        if &rec.name != name {
            return Err(CheckpointError::Tensor {
                name: rec.name,
                reason: format!("expected {name} at this position"),
            });
        }
        if [slot.rows(), slot.cols()] != rec.shape {
            return Err(CheckpointError::Tensor {
                name: rec.name,
                reason: format!(
                    "shape {:?} does not match architecture {:?}",
                    rec.shape,
                    slot.shape()
                ),
            });
        }
        *slot = Tensor::new(rec.shape[0], rec.shape[1], rec.data).map_err(|e| {
            CheckpointError::Tensor {
                name: name.clone(),
                reason: e.to_string(),
            }
        })?;
    }
    Ok(ModelState {
        mode: file.mode,
        model,
        adam: file.adam,
    })
}

pub fn save_checkpoint(state: &ModelState, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_checkpoint(state, &mut buf)?;
    fs::write(path, buf).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelState, CheckpointError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_checkpoint(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(hidden: Option<usize>) -> ModelState {
        let arch = Architecture {
            head_hidden: hidden,
            ..Architecture::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut model = Model::init(arch, &mut rng);
        model.ic.b_head.set(0, 3, 0.1 + 0.2);
        let adam = AdamState::new(0.01, model.tensors());
        ModelState {
            mode: Mode::SealCi,
            model,
            adam: Some(adam),
        }
    }

    fn to_string(s: &ModelState) -> String {
        let mut buf = Vec::new();
        write_checkpoint(s, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn round_trip_is_field_exact() {
        for hidden in [None, Some(48)] {
            let s = state(hidden);
            let text = to_string(&s);
            let back = read_checkpoint(&text).unwrap();
            assert_eq!(back, s);
            assert_eq!(to_string(&back), text);
        }
    }

    #[test]
    fn keys_are_sorted() {
        let text = to_string(&state(None));
        let pos = |k: &str| text.find(&format!("\"{k}\"")).unwrap();
        assert!(pos("adam") < pos("architecture"));
        assert!(pos("architecture") < pos("mode"));
        assert!(pos("mode") < pos("schema_version"));
        assert!(pos("schema_version") < pos("tensors"));
    }

    #[test]
    fn rejects_shape_and_version_mismatch() {
        let text = to_string(&state(None));
        let bumped = text.replace("\"schema_version\":1", "\"schema_version\":9");
        assert!(matches!(
            read_checkpoint(&bumped),
            Err(CheckpointError::Version { found: 9, .. })
        ));
        let wrong = text.replacen("\"num_classes\":7", "\"num_classes\":5", 1);
        assert!(matches!(
            read_checkpoint(&wrong),
            Err(CheckpointError::Tensor { .. })
        ));
    }
}
