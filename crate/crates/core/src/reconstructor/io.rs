//! `V2XW` weights files: the shared frame, a JSON manifest with the
//! architecture and a tensor table, then the packed little-endian `f32`
//! blob with each tensor row-major at its declared byte offset.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelArchitecture, ModelWeights, Tensor, WeightsError};
use crate::container::{read_frame, write_frame, Reader};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"V2XW";
pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    /// Byte offset into the blob.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsManifest {
    pub architecture: ModelArchitecture,
    pub tensors: Vec<TensorEntry>,
}

impl ModelWeights {
    pub fn manifest(&self) -> WeightsManifest {
        let mut offset = 0;
        let tensors = self
            .tensors
            .iter()
            .map(|t| {
                let e = TensorEntry {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    dtype: "float32".into(),
                    offset,
                };
                offset += t.data.len() * 4;
                e
            })
            .collect();
        WeightsManifest {
            architecture: self.arch.clone(),
            tensors,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_frame(&mut out, WEIGHTS_MAGIC, WEIGHTS_VERSION, &self.manifest()).expect("manifest serializes");
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses and validates a weights file. The architecture must have the
    /// full residual depth, and every tensor must match its declared shape.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WeightsError> {
        let (manifest, blob): (WeightsManifest, _) = read_frame(bytes, WEIGHTS_MAGIC, WEIGHTS_VERSION)?;
        let arch = manifest.architecture;
        arch.validate_strict()?;
        let specs = arch.tensor_specs();

        let mut expected_len = 0;
        for e in &manifest.tensors {
            if e.dtype != "float32" {
                return Err(WeightsError::Dtype {
                    name: e.name.clone(),
                    dtype: e.dtype.clone(),
                });
            }
            match specs.iter().find(|(n, _)| *n == e.name) {
                None => return Err(WeightsError::UnknownTensor(e.name.clone())),
                Some((_, shape)) if *shape != e.shape => {
                    return Err(WeightsError::Shape {
                        name: e.name.clone(),
                        expected: shape.clone(),
                        found: e.shape.clone(),
                    })
                }
                Some(_) => {}
            }
            expected_len += e.shape.iter().product::<usize>() * 4;
        }
        if blob.len() != expected_len {
            return Err(WeightsError::Length {
                expected: expected_len,
                actual: blob.len(),
            });
        }

        let mut tensors = Vec::with_capacity(manifest.tensors.len());
        for e in manifest.tensors {
            let len: usize = e.shape.iter().product();
            let end = e.offset.checked_add(len * 4).filter(|&end| end <= blob.len());
            let Some(end) = end else {
                return Err(WeightsError::Offset {
                    name: e.name,
                    offset: e.offset,
                    blob_len: blob.len(),
                });
            };
            let mut r = Reader::new(&blob[e.offset..end]);
            let data = (0..len).map(|_| r.f32()).collect();
            tensors.push(Tensor {
                name: e.name,
                shape: e.shape,
                data,
            });
        }
        ModelWeights::new(arch, tensors)
    }

    pub fn save(&self, path: &Path) -> Result<(), WeightsError> {
        fs::write(path, self.to_bytes()).map_err(|source| WeightsError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, WeightsError> {
        let bytes = fs::read(path).map_err(|source| WeightsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}
