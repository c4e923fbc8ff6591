//! Training: configuration, the half-life learning-rate schedule, the
//! training log and the [`Trainer`] loop.

mod trainer;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::imaging::{AugmentSpec, DownsampleMode, ImageError};
use crate::models::{CheckpointError, Family, ModelError, ModelSpec};
use crate::real::DType;
use crate::tensor::{AdamConfig, TensorError};

pub use trainer::{
    bicubic_baseline, bicubic_upscale, checkpoint_name, super_resolve, validate_with, FitOutcome,
    Trainer, ValidationReport, BEST_MARKER, CONFIG_FILE, LOSS_CSV, VALIDATION_CSV,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, iteration {iteration}{}", last_good.as_ref().map(|p| format!("; last good checkpoint: {p}")).unwrap_or_default())]
    NonFiniteLoss {
        epoch: usize,
        iteration: u64,
        last_good: Option<String>,
    },
    #[error("validation set is empty")]
    EmptyValidation,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl From<ConfigError> for TrainError {
    fn from(e: ConfigError) -> Self {
        TrainError::Config(e.to_string())
    }
}

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelSpec,
    pub lr_init: f64,
    /// Epochs per halving of the learning rate.
    pub step: f64,
    pub iterations_per_epoch: usize,
    pub batch: usize,
    /// LR crop side; HR crops are `scale` times larger.
    pub lr_crop: usize,
    pub epochs: usize,
    pub seed: u64,
    pub augment: bool,
    pub augment_spec: AugmentSpec,
    pub mode: DownsampleMode,
    pub dtype: DType,
    pub adam: AdamConfig,
}

impl TrainConfig {
    /// Family learning rate, step 100, 1000 iterations of 16 crops of 48 px,
    /// 300 epochs, single precision, no augmentation.
    pub fn new(model: ModelSpec) -> Self {
        TrainConfig {
            lr_init: model.family.default_learning_rate(),
            model,
            step: 100.0,
            iterations_per_epoch: 1000,
            batch: 16,
            lr_crop: 48,
            epochs: 300,
            seed: 0,
            augment: false,
            augment_spec: AugmentSpec::default(),
            mode: DownsampleMode::Bicubic,
            dtype: DType::F32,
            adam: AdamConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.model.validate()?;
        let bad = |what: &str| Err(TrainError::Config(what.to_string()));
        if !(self.lr_init >= 0.0 && self.lr_init.is_finite()) {
            return bad("lr_init must be a finite non-negative number");
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("step must be positive");
        }
        if self.iterations_per_epoch == 0
            || self.batch == 0
            || self.lr_crop == 0
            || self.epochs == 0
        {
            return bad("iterations, batch, lr_crop and epochs must be positive");
        }
        if self.model.family == Family::SrResnet && self.batch * self.lr_crop * self.lr_crop < 2 {
            return bad("batch norm needs at least two values per channel");
        }
        self.augment_spec.validate()?;
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        lr_at(self.lr_init, self.step, epoch as f64)
    }

    pub const KEYS: [&'static str; 17] = [
        "lr_init",
        "step",
        "iterations",
        "batch",
        "lr_crop",
        "epochs",
        "seed",
        "augment",
        "blur_sigma_min",
        "blur_sigma_max",
        "noise_variance_min",
        "noise_variance_max",
        "subset",
        "dtype",
        "adam_beta1",
        "adam_beta2",
        "adam_eps",
    ];

    /// All training and model keys.
    pub fn all_keys() -> Vec<&'static str> {
        ModelSpec::KEYS
            .iter()
            .chain(Self::KEYS.iter())
            .copied()
            .collect()
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = self.model.to_key_values();
        kv.set("lr_init", self.lr_init);
        kv.set("step", self.step);
        kv.set("iterations", self.iterations_per_epoch);
        kv.set("batch", self.batch);
        kv.set("lr_crop", self.lr_crop);
        kv.set("epochs", self.epochs);
        kv.set("seed", self.seed);
        kv.set("augment", self.augment);
        kv.set("blur_sigma_min", self.augment_spec.blur_sigma.0);
        kv.set("blur_sigma_max", self.augment_spec.blur_sigma.1);
        kv.set("noise_variance_min", self.augment_spec.noise_variance.0);
        kv.set("noise_variance_max", self.augment_spec.noise_variance.1);
        kv.set("subset", self.mode);
        kv.set(
            "dtype",
            if self.dtype == DType::F32 {
                "f32"
            } else {
                "f64"
            },
        );
        kv.set("adam_beta1", self.adam.beta1);
        kv.set("adam_beta2", self.adam.beta2);
        kv.set("adam_eps", self.adam.eps);
        kv
    }

    /// Builds a configuration from keys; missing keys take defaults. The
    /// learning rate defaults by family. Unknown keys are rejected.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, TrainError> {
        kv.reject_unknown(&Self::all_keys())?;
        let mut c = TrainConfig::new(ModelSpec::from_key_values(kv)?);
        macro_rules! take {
            ($key:literal, $field:expr) => {
                if let Some(v) = kv.parse_opt($key)? {
                    $field = v;
                }
            };
        }
        take!("lr_init", c.lr_init);
        take!("step", c.step);
        take!("iterations", c.iterations_per_epoch);
        take!("batch", c.batch);
        take!("lr_crop", c.lr_crop);
        take!("epochs", c.epochs);
        take!("seed", c.seed);
        take!("augment", c.augment);
        take!("blur_sigma_min", c.augment_spec.blur_sigma.0);
        take!("blur_sigma_max", c.augment_spec.blur_sigma.1);
        take!("noise_variance_min", c.augment_spec.noise_variance.0);
        take!("noise_variance_max", c.augment_spec.noise_variance.1);
        take!("adam_beta1", c.adam.beta1);
        take!("adam_beta2", c.adam.beta2);
        take!("adam_eps", c.adam.eps);
        if let Some(v) = kv.get("subset") {
            c.mode = v.parse().map_err(TrainError::Config)?;
        }
        if let Some(v) = kv.get("dtype") {
            c.dtype = match v {
                "f32" => DType::F32,
                "f64" => DType::F64,
                _ => {
                    return Err(TrainError::Config(format!(
                        "dtype `{v}` (expected f32 or f64)"
                    )))
                }
            };
        }
        Ok(c)
    }
}

/// `lr_init * 0.5^(epoch / step)`.
pub fn lr_at(lr_init: f64, step: f64, epoch: f64) -> f64 {
    lr_init * 0.5f64.powf(epoch / step)
}

/// Validation result of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub val_psnr: f64,
    pub lr: f64,
    pub mean_loss: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// `(iteration, loss)` for every iteration run in this session.
    pub losses: Vec<(u64, f64)>,
    pub epochs: Vec<EpochRecord>,
    /// The schedule's step, for reproduction.
    pub step: f64,
}

/// Index of the largest value; ties go to the earliest. NaNs never win.
pub fn best_index(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.map_or(true, |b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

impl TrainLog {
    /// The epoch with the highest validation PSNR, earliest on ties.
    pub fn best(&self) -> Option<&EpochRecord> {
        let psnrs: Vec<f64> = self.epochs.iter().map(|e| e.val_psnr).collect();
        best_index(&psnrs).map(|i| &self.epochs[i])
    }

    /// The same log with wall-clock times zeroed, for run-to-run comparison.
    pub fn without_timings(&self) -> TrainLog {
        let mut log = self.clone();
        log.epochs.iter_mut().for_each(|e| e.seconds = 0.0);
        log
    }

    pub fn loss_csv(&self) -> String {
        let mut s = String::from("iteration,loss\n");
        for (i, l) in &self.losses {
            let _ = writeln!(s, "{i},{l}");
        }
        s
    }

    pub fn validation_csv(&self) -> String {
        let mut s = String::from("epoch,val_psnr,lr,mean_loss,seconds\n");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.3}",
                e.epoch, e.val_psnr, e.lr, e.mean_loss, e.seconds
            );
        }
        s
    }
}
