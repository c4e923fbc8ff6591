//! Super-resolution architectures as explicit layer graphs.
//!
//! A [`ModelSpec`] names a family and its hyper-parameters; the builders in
//! this module turn it into a [`ModelGraph`] with freshly initialized
//! parameters. Graphs run forward in inference or training mode and
//! back-propagate into their own parameter store.

mod builders;
mod checkpoint;
mod graph;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::tensor::TensorError;

pub use builders::{
    build, build_edsr, build_sr_resnet, build_wdsr_a, build_wdsr_b, WDSR_B_LINEAR_RATIO,
};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_expecting,
    read_checkpoint_info, save_checkpoint, save_training_checkpoint, Checkpoint, CheckpointError,
    CheckpointInfo, FORMAT_VERSION, MAGIC,
};
pub use graph::{Mode, ModelGraph, Node, NodeId, Op, Tape, WeightRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    SrResnet,
    Edsr,
    WdsrA,
    WdsrB,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::SrResnet, Family::Edsr, Family::WdsrA, Family::WdsrB];

    pub fn name(self) -> &'static str {
        match self {
            Family::SrResnet => "sr-resnet",
            Family::Edsr => "edsr",
            Family::WdsrA => "wdsr-a",
            Family::WdsrB => "wdsr-b",
        }
    }

    pub fn is_wdsr(self) -> bool {
        matches!(self, Family::WdsrA | Family::WdsrB)
    }

    pub fn default_filters(self) -> usize {
        if self.is_wdsr() {
            32
        } else {
            64
        }
    }

    /// Learning rate the family trains stably at.
    pub fn default_learning_rate(self) -> f64 {
        if self.is_wdsr() {
            1e-3
        } else {
            1e-4
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown model `{0}` (expected one of: sr-resnet, edsr, wdsr-a, wdsr-b)")]
pub struct UnknownFamily(pub String);

impl FromStr for Family {
    type Err = UnknownFamily;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "sr-resnet" | "srresnet" => Ok(Family::SrResnet),
            "edsr" => Ok(Family::Edsr),
            "wdsr-a" => Ok(Family::WdsrA),
            "wdsr-b" => Ok(Family::WdsrB),
            _ => Err(UnknownFamily(s.to_string())),
        }
    }
}

/// Architecture hyper-parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub blocks: usize,
    pub base_filters: usize,
    pub scale: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Kernel of the last SR-ResNet convolution (EDSR always uses 3).
    pub final_kernel: usize,
}

impl ModelSpec {
    /// Grayscale, scale 4, family default widths.
    pub fn new(family: Family, blocks: usize) -> Self {
        ModelSpec {
            family,
            blocks,
            base_filters: family.default_filters(),
            scale: 4,
            in_channels: 1,
            out_channels: 1,
            final_kernel: 9,
        }
    }

    pub fn with_scale(mut self, scale: usize) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_channels(mut self, channels: usize) -> Self {
        self.in_channels = channels;
        self.out_channels = channels;
        self
    }

    pub fn with_filters(mut self, filters: usize) -> Self {
        self.base_filters = filters;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.scale == 0 {
            return Err(ModelError::UnsupportedScale {
                family: self.family,
                scale: 0,
            });
        }
        if !self.family.is_wdsr() && !self.scale.is_power_of_two() {
            return Err(ModelError::UnsupportedScale {
                family: self.family,
                scale: self.scale,
            });
        }
        if self.base_filters == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(ModelError::InvalidSpec(
                "filter and channel counts must be positive".into(),
            ));
        }
        if self.final_kernel % 2 == 0 {
            return Err(ModelError::InvalidSpec(format!(
                "final kernel {} must be odd",
                self.final_kernel
            )));
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 8] = [
        "model",
        "blocks",
        "base_filters",
        "scale",
        "channels",
        "in_channels",
        "out_channels",
        "final_kernel",
    ];

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("model", self.family);
        kv.set("blocks", self.blocks);
        kv.set("base_filters", self.base_filters);
        kv.set("scale", self.scale);
        kv.set("in_channels", self.in_channels);
        kv.set("out_channels", self.out_channels);
        kv.set("final_kernel", self.final_kernel);
        kv
    }

    /// Reads the model keys of `kv`; missing keys take family defaults.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, ConfigError> {
        let family: Family = kv.parse_opt("model")?.unwrap_or(Family::WdsrB);
        let mut spec = ModelSpec::new(family, kv.parse_opt("blocks")?.unwrap_or(8));
        if let Some(v) = kv.parse_opt("base_filters")? {
            spec.base_filters = v;
        }
        if let Some(v) = kv.parse_opt("scale")? {
            spec.scale = v;
        }
        if let Some(v) = kv.parse_opt::<usize>("channels")? {
            spec = spec.with_channels(v);
        }
        if let Some(v) = kv.parse_opt("in_channels")? {
            spec.in_channels = v;
        }
        if let Some(v) = kv.parse_opt("out_channels")? {
            spec.out_channels = v;
        }
        if let Some(v) = kv.parse_opt("final_kernel")? {
            spec.final_kernel = v;
        }
        Ok(spec)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{} (x{}, {} filters, {}->{} ch)",
            self.family,
            self.blocks,
            self.scale,
            self.base_filters,
            self.in_channels,
            self.out_channels
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{family} does not support scale {scale} (SR-ResNet and EDSR need a power of two)")]
    UnsupportedScale { family: Family, scale: usize },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("input has {actual} channels, model expects {expected}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
