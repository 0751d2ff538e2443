//! Activation dumps, label files and run manifests.
//!
//! Layer files (`.cdr`):
//!
//! ```text
//! offset  size        field
//! 0       4           magic "CDR1"
//! 4       4           n        (u32, little-endian)
//! 8       4           d_model  (u32, little-endian)
//! 12      4*n*d_model row-major IEEE-754 binary32, little-endian
//! ```
//!
//! Label files (`.cdl`): magic `CDL1`, little-endian u32 `n`, then `n` bytes
//! each `0x00` or `0x01`.
//!
//! A run directory holds `manifest.json`, `labels.cdl` and
//! `layer_000.cdr` .. `layer_{d-1}.cdr`. Layer files are zero-indexed: the
//! first transformer layer is `layer_000`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::json;

pub const LAYER_MAGIC: [u8; 4] = *b"CDR1";
pub const LABEL_MAGIC: [u8; 4] = *b"CDL1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELS_FILE: &str = "labels.cdl";

const HEADER_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },
    #[error("truncated file: header declares {expected} payload bytes, found {found}")]
    TruncatedFile { expected: u64, found: u64 },
    #[error("{found} trailing bytes after the declared payload")]
    TrailingBytes { found: u64 },
    #[error("non-finite value at flat index {index}")]
    NonFiniteValue { index: usize },
    #[error("invalid label byte 0x{byte:02x} at index {index}")]
    InvalidLabel { index: usize, byte: u8 },
    #[error("data length {len} does not equal n * d_model = {n} * {d_model}")]
    DataLength { len: usize, n: usize, d_model: usize },
    #[error("dimension {0} does not fit in a u32 header field")]
    DimensionOverflow(usize),
    #[error("missing layer file for layer {0}")]
    MissingLayer(usize),
    #[error("unexpected layer file for layer {0} beyond the manifest's layer count")]
    UnexpectedLayer(usize),
    #[error("layer {layer}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        layer: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("labels hold {found} samples, manifest declares {expected}")]
    LabelCount { expected: usize, found: usize },
    #[error("invalid manifest: {0}")]
    Manifest(String),
}

impl FormatError {
    pub fn is_io(&self) -> bool {
        matches!(self, FormatError::Io { .. })
    }

    fn io(path: &Path, source: io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// One layer's activations, `n` rows of `d_model` features.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationMatrix {
    layer_index: usize,
    n: usize,
    d_model: usize,
    data: Vec<f32>,
}

impl RepresentationMatrix {
    pub fn new(
        layer_index: usize,
        n: usize,
        d_model: usize,
        data: Vec<f32>,
    ) -> Result<Self, FormatError> {
        if n.checked_mul(d_model) != Some(data.len()) {
            return Err(FormatError::DataLength {
                len: data.len(),
                n,
                d_model,
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(FormatError::NonFiniteValue { index });
        }
        Ok(Self {
            layer_index,
            n,
            d_model,
            data,
        })
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d_model..(i + 1) * self.d_model]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.d_model)
    }
}

/// Binary labels, one byte per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<u8>,
}

impl LabelVector {
    pub fn new(labels: Vec<u8>) -> Result<Self, FormatError> {
        if let Some((index, &byte)) = labels.iter().enumerate().find(|(_, &b)| b > 1) {
            return Err(FormatError::InvalidLabel { index, byte });
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.labels
    }
}

/// Layer counts of the published model line-up, keyed by normalized name.
const KNOWN_LAYER_COUNTS: &[(&str, usize)] = &[
    ("gemma2b", 18),
    ("gemma7b", 28),
    ("llama7b", 32),
    ("llama13b", 40),
    ("qwen0.5b", 24),
    ("qwen1.8b", 24),
    ("qwen4b", 40),
    ("qwen7b", 32),
    ("qwen14b", 40),
];

/// Expected layer count for a model name from the published line-up, if the
/// name is one of them. Matching ignores case, `-`, `_` and spaces.
pub fn known_layer_count(model_name: &str) -> Option<usize> {
    let key: String = model_name
        .chars()
        .filter(|c| !matches!(c, '-' | '_' | ' '))
        .flat_map(char::to_lowercase)
        .collect();
    KNOWN_LAYER_COUNTS
        .iter()
        .find(|(name, _)| *name == key)
        .map(|&(_, d)| d)
}

/// Provenance record for one (model, dataset) activation dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub model_name: String,
    pub dataset_name: String,
    pub num_layers: usize,
    pub n: usize,
    pub d_model: usize,
    pub extraction_point: String,
    pub quantization_bits: u32,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    /// Keys this version does not know about; kept so rewriting a manifest
    /// does not drop them.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl RunManifest {
    pub fn validate(&self) -> Result<(), FormatError> {
        if self.num_layers == 0 {
            return Err(FormatError::Manifest("num_layers must be at least 1".into()));
        }
        if !matches!(self.quantization_bits, 8 | 16 | 32) {
            return Err(FormatError::Manifest(format!(
                "quantization_bits must be 8, 16 or 32, got {}",
                self.quantization_bits
            )));
        }
        if let Some(expected) = known_layer_count(&self.model_name) {
            if expected != self.num_layers {
                return Err(FormatError::Manifest(format!(
                    "{} has {} layers, manifest declares {}",
                    self.model_name, expected, self.num_layers
                )));
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| FormatError::Manifest(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        let text =
            json::to_canonical_string(self).map_err(|e| FormatError::Manifest(e.to_string()))?;
        fs::write(path, text).map_err(|e| FormatError::io(path, e))
    }
}

/// Encodes a matrix as CDR1 bytes.
pub fn encode_layer(matrix: &RepresentationMatrix) -> Result<Vec<u8>, FormatError> {
    let n = u32::try_from(matrix.n).map_err(|_| FormatError::DimensionOverflow(matrix.n))?;
    let d = u32::try_from(matrix.d_model).map_err(|_| FormatError::DimensionOverflow(matrix.d_model))?;
    if let Some(index) = matrix.data.iter().position(|v| !v.is_finite()) {
        return Err(FormatError::NonFiniteValue { index });
    }
    let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * matrix.data.len());
    bytes.extend_from_slice(&LAYER_MAGIC);
    bytes.extend_from_slice(&n.to_le_bytes());
    bytes.extend_from_slice(&d.to_le_bytes());
    for v in &matrix.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    Ok(bytes)
}

/// Decodes CDR1 bytes. The layer index is not stored in the file and is
/// supplied by the caller.
pub fn decode_layer(bytes: &[u8], layer_index: usize) -> Result<RepresentationMatrix, FormatError> {
    check_magic(bytes, LAYER_MAGIC)?;
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::TruncatedFile {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let n = read_u32(&bytes[4..8]) as usize;
    let d_model = read_u32(&bytes[8..12]) as usize;
    let expected = 4 * n as u64 * d_model as u64;
    let found = (bytes.len() - HEADER_LEN) as u64;
    if found < expected {
        return Err(FormatError::TruncatedFile { expected, found });
    }
    if found > expected {
        return Err(FormatError::TrailingBytes {
            found: found - expected,
        });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    RepresentationMatrix::new(layer_index, n, d_model, data)
}

pub fn write_layer(matrix: &RepresentationMatrix, path: &Path) -> Result<(), FormatError> {
    let bytes = encode_layer(matrix)?;
    fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

/// Reads a layer file. The layer index is taken from a `layer_NNN.cdr` file
/// name and defaults to 0 for other names.
pub fn read_layer(path: &Path) -> Result<RepresentationMatrix, FormatError> {
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    let index = path
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(parse_layer_file_name)
        .unwrap_or(0);
    decode_layer(&bytes, index)
}

pub fn encode_labels(labels: &LabelVector) -> Result<Vec<u8>, FormatError> {
    let n = u32::try_from(labels.len()).map_err(|_| FormatError::DimensionOverflow(labels.len()))?;
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABEL_MAGIC);
    bytes.extend_from_slice(&n.to_le_bytes());
    bytes.extend_from_slice(labels.as_slice());
    Ok(bytes)
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelVector, FormatError> {
    check_magic(bytes, LABEL_MAGIC)?;
    if bytes.len() < 8 {
        return Err(FormatError::TruncatedFile {
            expected: 8,
            found: bytes.len() as u64,
        });
    }
    let n = read_u32(&bytes[4..8]) as u64;
    let found = (bytes.len() - 8) as u64;
    if found < n {
        return Err(FormatError::TruncatedFile { expected: n, found });
    }
    if found > n {
        return Err(FormatError::TrailingBytes { found: found - n });
    }
    LabelVector::new(bytes[8..].to_vec())
}

pub fn write_labels(labels: &LabelVector, path: &Path) -> Result<(), FormatError> {
    let bytes = encode_labels(labels)?;
    fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<LabelVector, FormatError> {
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    decode_labels(&bytes)
}

pub fn layer_file_name(layer: usize) -> String {
    format!("layer_{layer:03}.cdr")
}

fn parse_layer_file_name(name: &str) -> Option<usize> {
    name.strip_prefix("layer_")?.strip_suffix(".cdr")?.parse().ok()
}

/// A fully loaded and validated run directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub manifest: RunManifest,
    pub layers: Vec<RepresentationMatrix>,
    pub labels: LabelVector,
}

/// Loads a run directory and checks that every layer matches the manifest's
/// `(n, d_model)` and that no layer file is missing or surplus.
pub fn load_run(dir: &Path) -> Result<Run, FormatError> {
    let manifest = RunManifest::read(&dir.join(MANIFEST_FILE))?;
    manifest.validate()?;
    let expected = (manifest.n, manifest.d_model);

    check_no_surplus_layers(dir, manifest.num_layers)?;

    let mut layers = Vec::with_capacity(manifest.num_layers);
    for layer in 0..manifest.num_layers {
        let path = dir.join(layer_file_name(layer));
        if !path.is_file() {
            return Err(FormatError::MissingLayer(layer));
        }
        let matrix = read_layer(&path)?;
        if matrix.shape() != expected {
            return Err(FormatError::ShapeMismatch {
                layer,
                expected,
                found: matrix.shape(),
            });
        }
        layers.push(matrix);
    }

    let labels = read_labels(&dir.join(LABELS_FILE))?;
    if labels.len() != manifest.n {
        return Err(FormatError::LabelCount {
            expected: manifest.n,
            found: labels.len(),
        });
    }
    Ok(Run {
        manifest,
        layers,
        labels,
    })
}

/// Writes a run directory (creating it if needed). Shapes are checked
/// against the manifest before anything is written.
pub fn write_run(
    dir: &Path,
    manifest: &RunManifest,
    layers: &[RepresentationMatrix],
    labels: &LabelVector,
) -> Result<(), FormatError> {
    manifest.validate()?;
    if layers.len() != manifest.num_layers {
        return Err(FormatError::Manifest(format!(
            "manifest declares {} layers, {} supplied",
            manifest.num_layers,
            layers.len()
        )));
    }
    let expected = (manifest.n, manifest.d_model);
    for (layer, matrix) in layers.iter().enumerate() {
        if matrix.shape() != expected {
            return Err(FormatError::ShapeMismatch {
                layer,
                expected,
                found: matrix.shape(),
            });
        }
    }
    if labels.len() != manifest.n {
        return Err(FormatError::LabelCount {
            expected: manifest.n,
            found: labels.len(),
        });
    }
    fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    for (layer, matrix) in layers.iter().enumerate() {
        write_layer(matrix, &dir.join(layer_file_name(layer)))?;
    }
    write_labels(labels, &dir.join(LABELS_FILE))?;
    manifest.write(&dir.join(MANIFEST_FILE))
}

fn check_no_surplus_layers(dir: &Path, num_layers: usize) -> Result<(), FormatError> {
    let entries = fs::read_dir(dir).map_err(|e| FormatError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| FormatError::io(dir, e))?;
        let name = entry.file_name();
        let Some(index) = name.to_str().and_then(parse_layer_file_name) else {
            continue;
        };
        if index >= num_layers {
            return Err(FormatError::UnexpectedLayer(index));
        }
    }
    Ok(())
}

fn check_magic(bytes: &[u8], expected: [u8; 4]) -> Result<(), FormatError> {
    let head = &bytes[..bytes.len().min(4)];
    if head != expected {
        return Err(FormatError::BadMagic {
            expected,
            found: head.to_vec(),
        });
    }
    Ok(())
}

fn read_u32(bytes: &[u8]) -> u32 {
    u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
}
