//! Binary checkpoint format.
//!
//! ```text
//! offset  size  content
//! 0       8     magic  b"RKSRCKPT"
//! 8       4     format version, u32 little-endian
//! 12      4     header length H, u32 little-endian
//! 16      H     UTF-8 JSON header
//! 16+H    ...   payload: every tensor listed in the header, in order,
//!               as little-endian values of the header's dtype
//! ```
//!
//! The header carries the [`ModelSpec`], the payload dtype, the name and
//! NCHW shape of each payload tensor, batch-norm settings, optional Adam
//! settings and free-form metadata. Payload order is: parameters in graph
//! order, then running mean and variance of each initialized batch norm,
//! then the Adam first moments followed by the second moments.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{build, ModelError, ModelGraph, ModelSpec};
use crate::fsutil::write_atomic;
use crate::real::{DType, Real};
use crate::tensor::{AdamConfig, AdamState, RunningStats, Shape, Tensor};

pub const MAGIC: &[u8; 8] = b"RKSRCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("checkpoint truncated: needed {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("checkpoint has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("malformed checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("checkpoint holds {found}, expected {expected}")]
    SpecMismatch { expected: String, found: String },
    #[error("checkpoint tensor `{name}`: expected shape {expected}, found {found}")]
    ShapeMismatch {
        name: String,
        expected: Shape,
        found: Shape,
    },
    #[error("checkpoint lists {found} tensors, the model needs {expected}")]
    TensorCount { expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("checkpoint I/O on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 4],
}

#[derive(Serialize, Deserialize)]
struct NormEntry {
    momentum: f64,
    eps: f64,
    initialized: bool,
}

#[derive(Serialize, Deserialize)]
struct AdamEntry {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    dtype: DType,
    norms: Vec<NormEntry>,
    adam: Option<AdamEntry>,
    tensors: Vec<TensorEntry>,
    metadata: BTreeMap<String, String>,
}

/// A model plus optional optimizer state.
#[derive(Clone, Debug)]
pub struct Checkpoint<T> {
    pub model: ModelGraph<T>,
    pub optimizer: Option<AdamState<T>>,
}

fn vector_shape(len: usize) -> Shape {
    Shape::new(1, len, 1, 1)
}

/// Serializes a model (and optionally its optimizer) to bytes.
pub fn encode_checkpoint<T: Real>(
    model: &ModelGraph<T>,
    optimizer: Option<&AdamState<T>>,
) -> Vec<u8> {
    let mut tensors = Vec::new();
    let mut payload = Vec::new();
    for p in model.params() {
        tensors.push(TensorEntry {
            name: p.name.clone(),
            shape: p.value.shape().dims(),
        });
        T::to_le_bytes_vec(p.value.data(), &mut payload);
    }
    for (i, n) in model.norms().iter().enumerate() {
        if let Some(r) = &n.running {
            for (what, values) in [("mean", &r.mean), ("var", &r.var)] {
                tensors.push(TensorEntry {
                    name: format!("norm.{i}.{what}"),
                    shape: vector_shape(values.len()).dims(),
                });
                T::to_le_bytes_vec(values, &mut payload);
            }
        }
    }
    if let Some(opt) = optimizer {
        for (what, moments) in [("m", &opt.first), ("v", &opt.second)] {
            for (p, values) in model.params().iter().zip(moments) {
                tensors.push(TensorEntry {
                    name: format!("adam.{what}.{}", p.name),
                    shape: p.value.shape().dims(),
                });
                T::to_le_bytes_vec(values, &mut payload);
            }
        }
    }
    let header = Header {
        spec: model.spec().clone(),
        dtype: T::DTYPE,
        norms: model
            .norms()
            .iter()
            .map(|n| NormEntry {
                momentum: n.momentum,
                eps: n.eps,
                initialized: n.running.is_some(),
            })
            .collect(),
        adam: optimizer.map(|o| AdamEntry {
            beta1: o.config.beta1,
            beta2: o.config.beta2,
            eps: o.config.eps,
            step: o.step,
        }),
        tensors,
        metadata: model.metadata.clone(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    dtype: DType,
}

impl Reader<'_> {
    fn values<T: Real>(&mut self, count: usize) -> Result<Vec<T>, CheckpointError> {
        let size = self.dtype.size();
        let end = self.pos + count * size;
        if end > self.bytes.len() {
            return Err(CheckpointError::Truncated {
                expected: end,
                actual: self.bytes.len(),
            });
        }
        let chunk = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(match self.dtype {
            DType::F32 => chunk
                .chunks_exact(4)
                .map(|c| T::lit(f32::from_le_chunk(c) as f64))
                .collect(),
            DType::F64 => chunk
                .chunks_exact(8)
                .map(|c| T::lit(f64::from_le_chunk(c)))
                .collect(),
        })
    }
}

fn expect_entry<'h>(
    entries: &mut impl Iterator<Item = &'h TensorEntry>,
    name: &str,
    shape: Shape,
    total: usize,
) -> Result<(), CheckpointError> {
    let e = entries.next().ok_or(CheckpointError::TensorCount {
        expected: total + 1,
        found: total,
    })?;
    let found = Shape::from_dims(e.shape);
    if e.name != name || found != shape {
        return Err(CheckpointError::ShapeMismatch {
            name: name.to_string(),
            expected: shape,
            found,
        });
    }
    Ok(())
}

fn parse_header(bytes: &[u8]) -> Result<(Header, usize), CheckpointError> {
    if bytes.len() < 8 {
        return Err(if MAGIC.starts_with(bytes) {
            CheckpointError::Truncated {
                expected: 16,
                actual: bytes.len(),
            }
        } else {
            CheckpointError::BadMagic
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < 16 {
        return Err(CheckpointError::Truncated {
            expected: 16,
            actual: bytes.len(),
        });
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    if bytes.len() < 16 + hlen {
        return Err(CheckpointError::Truncated {
            expected: 16 + hlen,
            actual: bytes.len(),
        });
    }
    Ok((serde_json::from_slice(&bytes[16..16 + hlen])?, 16 + hlen))
}

/// Header fields of a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointInfo {
    pub spec: ModelSpec,
    pub dtype: DType,
    pub has_optimizer: bool,
    pub metadata: BTreeMap<String, String>,
}

/// Reads only the header of the checkpoint at `path`.
pub fn read_checkpoint_info(path: &Path) -> Result<CheckpointInfo, CheckpointError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let (h, _) = parse_header(&bytes)?;
    Ok(CheckpointInfo {
        spec: h.spec,
        dtype: h.dtype,
        has_optimizer: h.adam.is_some(),
        metadata: h.metadata,
    })
}

/// Parses checkpoint bytes. When `expected` is given, the embedded spec must
/// equal it.
pub fn decode_checkpoint<T: Real>(
    bytes: &[u8],
    expected: Option<&ModelSpec>,
) -> Result<Checkpoint<T>, CheckpointError> {
    let (header, payload_start) = parse_header(bytes)?;
    if let Some(spec) = expected {
        if *spec != header.spec {
            return Err(CheckpointError::SpecMismatch {
                expected: spec.to_string(),
                found: header.spec.to_string(),
            });
        }
    }

    let mut model: ModelGraph<T> = build(&header.spec, 0)?;
    model.metadata = header.metadata.clone();
    if header.norms.len() != model.norms().len() {
        return Err(CheckpointError::TensorCount {
            expected: model.norms().len(),
            found: header.norms.len(),
        });
    }
    let total = header.tensors.len();
    let mut entries = header.tensors.iter();
    let mut reader = Reader {
        bytes,
        pos: payload_start,
        dtype: header.dtype,
    };

    for p in model.params_mut() {
        let shape = p.value.shape();
        expect_entry(&mut entries, &p.name, shape, total)?;
        p.value = Tensor::from_vec(shape, reader.values(shape.len())?).map_err(ModelError::from)?;
    }
    for (state, entry) in model.norms_mut().iter_mut().zip(&header.norms) {
        state.momentum = entry.momentum;
        state.eps = entry.eps;
        state.running = None;
    }
    let channels: Vec<usize> = model
        .nodes()
        .iter()
        .filter(|n| matches!(n.op, super::Op::BatchNorm { .. }))
        .map(|n| n.channels)
        .collect();
    for (i, entry) in header.norms.iter().enumerate() {
        if entry.initialized {
            let c = channels[i];
            expect_entry(
                &mut entries,
                &format!("norm.{i}.mean"),
                vector_shape(c),
                total,
            )?;
            let mean = reader.values(c)?;
            expect_entry(
                &mut entries,
                &format!("norm.{i}.var"),
                vector_shape(c),
                total,
            )?;
            let var = reader.values(c)?;
            model.norms_mut()[i].running = Some(RunningStats { mean, var });
        }
    }
    let optimizer = match &header.adam {
        None => None,
        Some(a) => {
            let mut moments = [Vec::new(), Vec::new()];
            for (what, store) in ["m", "v"].iter().zip(moments.iter_mut()) {
                for p in model.params() {
                    expect_entry(
                        &mut entries,
                        &format!("adam.{what}.{}", p.name),
                        p.value.shape(),
                        total,
                    )?;
                    store.push(reader.values(p.len())?);
                }
            }
            let [first, second] = moments;
            Some(AdamState {
                config: AdamConfig {
                    beta1: a.beta1,
                    beta2: a.beta2,
                    eps: a.eps,
                },
                step: a.step,
                first,
                second,
            })
        }
    };
    if entries.next().is_some() {
        return Err(CheckpointError::TensorCount {
            expected: total - 1,
            found: total,
        });
    }
    if reader.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - reader.pos));
    }
    Ok(Checkpoint { model, optimizer })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn save_checkpoint<T: Real>(model: &ModelGraph<T>, path: &Path) -> Result<(), CheckpointError> {
    write_atomic(path, &encode_checkpoint(model, None)).map_err(io_err(path))
}

pub fn save_training_checkpoint<T: Real>(
    model: &ModelGraph<T>,
    optimizer: &AdamState<T>,
    path: &Path,
) -> Result<(), CheckpointError> {
    write_atomic(path, &encode_checkpoint(model, Some(optimizer))).map_err(io_err(path))
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Checkpoint<T>, CheckpointError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_checkpoint(&bytes, None)
}

/// Loads a checkpoint that must hold exactly `spec`.
pub fn load_checkpoint_expecting<T: Real>(
    path: &Path,
    spec: &ModelSpec,
) -> Result<Checkpoint<T>, CheckpointError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_checkpoint(&bytes, Some(spec))
}
