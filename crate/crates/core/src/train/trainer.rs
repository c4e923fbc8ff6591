use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{EpochRecord, TrainConfig, TrainError, TrainLog};
use crate::imaging::{
    augment, images_to_tensor, resize_to, sample_crops, GrayImage, ImagePair, ResampleKernel,
};
use crate::metrics::{mean_variance, psnr};
use crate::models::{
    build, encode_checkpoint, load_checkpoint_expecting, Checkpoint, CheckpointError, ModelGraph,
};
use crate::real::Real;
use crate::rng::{indexed_substream, stream};
use crate::tensor::{adam_step, AdamState, Tensor};

pub const LOSS_CSV: &str = "train_loss.csv";
pub const VALIDATION_CSV: &str = "validation.csv";
/// Text file naming the best epoch and its checkpoint.
pub const BEST_MARKER: &str = "BEST";
pub const CONFIG_FILE: &str = "config.txt";

const META_EPOCHS: &str = "epochs_completed";
const META_ITERATION: &str = "iteration";
const META_HISTORY: &str = "history";
const META_CONFIG: &str = "train_config";

/// Per-image PSNRs of one validation pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub psnrs: Vec<f64>,
    /// Mean over the finite PSNRs; `+inf` if every image was reproduced exactly.
    pub mean: f64,
    pub infinite: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOutcome {
    pub best_epoch: usize,
    pub best_psnr: f64,
    pub best_checkpoint: PathBuf,
    pub checkpoints: Vec<PathBuf>,
}

/// Runs `model` on a single LR image. The result is clamped to `[0, 1]`
/// and carries the LR bit depth.
pub fn super_resolve<T: Real>(
    model: &ModelGraph<T>,
    lr: &GrayImage,
) -> Result<GrayImage, TrainError> {
    let out = model.forward(&lr.to_tensor::<T>())?;
    Ok(GrayImage::from_tensor(&out, 0).with_max_value(lr.max_value()))
}

/// Antialiased bicubic upscaling of `lr` to `width x height`, clamped.
pub fn bicubic_upscale(
    lr: &GrayImage,
    width: usize,
    height: usize,
) -> Result<GrayImage, TrainError> {
    Ok(resize_to(lr, width, height, ResampleKernel::bicubic())?.clamp())
}

/// Scores `upscale(pair)` against every HR image. Outputs are quantized to
/// the HR bit depth before scoring.
pub fn validate_with(
    pairs: &[ImagePair],
    mut upscale: impl FnMut(&ImagePair) -> Result<GrayImage, TrainError>,
) -> Result<ValidationReport, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyValidation);
    }
    let mut psnrs = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let sr = upscale(pair)?
            .with_max_value(pair.hr.max_value())
            .quantized();
        psnrs.push(psnr(&sr, &pair.hr)?);
    }
    let (stats, _) = mean_variance(&psnrs);
    let infinite = psnrs.iter().filter(|p| p.is_infinite()).count();
    let mean = match stats {
        Some((m, _)) => m,
        None if psnrs.iter().all(|&p| p == f64::INFINITY) => f64::INFINITY,
        None => f64::NAN,
    };
    Ok(ValidationReport {
        psnrs,
        mean,
        infinite,
    })
}

/// Bicubic reference on a validation set.
pub fn bicubic_baseline(pairs: &[ImagePair]) -> Result<ValidationReport, TrainError> {
    validate_with(pairs, |p| {
        bicubic_upscale(&p.lr, p.hr.width(), p.hr.height())
    })
}

/// Model, optimizer and log of one training run.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    pub config: TrainConfig,
    pub model: ModelGraph<T>,
    pub optimizer: AdamState<T>,
    pub log: TrainLog,
    epoch: usize,
    iteration: u64,
}

impl<T: Real> Trainer<T> {
    /// A fresh run with parameters initialized from the config seed.
    pub fn new(config: TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let model = build::<T>(&config.model, config.seed)?;
        Ok(Self::with_model(config, model))
    }

    /// A fresh run starting from the given parameters.
    pub fn with_model(config: TrainConfig, model: ModelGraph<T>) -> Self {
        let optimizer = AdamState::new(config.adam, model.params());
        let log = TrainLog {
            step: config.step,
            ..TrainLog::default()
        };
        Trainer {
            config,
            model,
            optimizer,
            log,
            epoch: 0,
            iteration: 0,
        }
    }

    /// Continues a run from a checkpoint written by [`Trainer::fit`]. The
    /// epoch counter, iteration counter, validation history and optimizer
    /// moments are restored; per-iteration losses of earlier sessions are
    /// not.
    pub fn resume(config: TrainConfig, checkpoint: Checkpoint<T>) -> Result<Self, TrainError> {
        config.validate()?;
        let Checkpoint { model, optimizer } = checkpoint;
        if model.spec() != &config.model {
            return Err(CheckpointError::SpecMismatch {
                expected: config.model.to_string(),
                found: model.spec().to_string(),
            }
            .into());
        }
        let meta = |key: &str| {
            model.metadata.get(key).ok_or_else(|| {
                TrainError::Config(format!("checkpoint has no `{key}` training metadata"))
            })
        };
        let bad =
            |key: &str| TrainError::Config(format!("checkpoint metadata `{key}` is malformed"));
        let epoch = meta(META_EPOCHS)?.parse().map_err(|_| bad(META_EPOCHS))?;
        let iteration = meta(META_ITERATION)?
            .parse()
            .map_err(|_| bad(META_ITERATION))?;
        let epochs: Vec<EpochRecord> =
            serde_json::from_str(meta(META_HISTORY)?).map_err(|_| bad(META_HISTORY))?;
        let optimizer = match optimizer {
            Some(mut o) => {
                o.config = config.adam;
                o
            }
            None => {
                return Err(TrainError::Config(
                    "checkpoint holds no optimizer state".into(),
                ))
            }
        };
        Ok(Trainer {
            log: TrainLog {
                losses: Vec::new(),
                epochs,
                step: config.step,
            },
            config,
            model,
            optimizer,
            epoch,
            iteration,
        })
    }

    pub fn resume_from(config: TrainConfig, path: &Path) -> Result<Self, TrainError> {
        let ckpt = load_checkpoint_expecting(path, &config.model)?;
        Self::resume(config, ckpt)
    }

    /// Epochs completed so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Iterations completed so far.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Mean squared error of the model on a batch, in inference mode.
    pub fn loss(&self, lr: &Tensor<T>, hr: &Tensor<T>) -> Result<f64, TrainError> {
        let out = self.model.forward(lr)?;
        out.shape().expect("loss", &hr.shape())?;
        Ok(mse(&out, hr))
    }

    /// One optimization step on a batch at learning rate `rate`. Returns the
    /// loss before the update.
    pub fn train_step(
        &mut self,
        lr: &Tensor<T>,
        hr: &Tensor<T>,
        rate: f64,
    ) -> Result<f64, TrainError> {
        let tape = self.model.forward_train(lr)?;
        let out = tape.output();
        out.shape().expect("loss", &hr.shape())?;
        let loss = mse(out, hr);
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch: self.epoch,
                iteration: self.iteration + 1,
                last_good: None,
            });
        }
        let scale = T::lit(2.0 / out.len() as f64);
        let grad_data = out
            .data()
            .iter()
            .zip(hr.data())
            .map(|(&o, &y)| scale * (o - y))
            .collect();
        let grad = Tensor::from_vec(out.shape(), grad_data)?;
        self.model.zero_grads();
        self.model.backward(&tape, &grad)?;
        adam_step(self.model.params_mut(), &mut self.optimizer, rate)?;
        self.iteration += 1;
        self.log.losses.push((self.iteration, loss));
        Ok(loss)
    }

    /// Runs the iterations of the next epoch at its scheduled learning rate
    /// and returns the mean training loss. Does not validate.
    pub fn train_epoch(&mut self, train: &[ImagePair]) -> Result<f64, TrainError> {
        let c = &self.config;
        let (batch, crop, scale, iterations) =
            (c.batch, c.lr_crop, c.model.scale, c.iterations_per_epoch);
        let augment_spec = c.augment.then_some(c.augment_spec);
        let rate = c.lr_at(self.epoch);
        let mut crop_rng = indexed_substream(c.seed, stream::CROPS, self.epoch as u64);
        let mut aug_rng = indexed_substream(c.seed, stream::AUGMENT, self.epoch as u64);
        let mut total = 0.0;
        for _ in 0..iterations {
            let mut crops = sample_crops(train, batch, crop, scale, &mut crop_rng)?;
            if let Some(spec) = &augment_spec {
                for c in &mut crops {
                    c.0 = augment(&c.0, spec, &mut aug_rng).0;
                }
            }
            let lr: Vec<&GrayImage> = crops.iter().map(|c| &c.0).collect();
            let hr: Vec<&GrayImage> = crops.iter().map(|c| &c.1).collect();
            total += self.train_step(&images_to_tensor(&lr), &images_to_tensor(&hr), rate)?;
        }
        self.epoch += 1;
        Ok(total / iterations as f64)
    }

    /// Validation PSNR of the current model on full-size images.
    pub fn validate(&self, valid: &[ImagePair]) -> Result<ValidationReport, TrainError> {
        validate_with(valid, |p| super_resolve(&self.model, &p.lr))
    }

    /// Trains one epoch, validates, and appends the record to the log.
    pub fn run_epoch(
        &mut self,
        train: &[ImagePair],
        valid: &[ImagePair],
    ) -> Result<EpochRecord, TrainError> {
        let start = Instant::now();
        let epoch = self.epoch;
        let lr = self.config.lr_at(epoch);
        let mean_loss = self.train_epoch(train)?;
        let report = self.validate(valid)?;
        let record = EpochRecord {
            epoch,
            val_psnr: report.mean,
            lr,
            mean_loss,
            seconds: start.elapsed().as_secs_f64(),
        };
        self.log.epochs.push(record.clone());
        Ok(record)
    }

    /// The model with run-state metadata attached, encoded with its
    /// optimizer.
    pub fn checkpoint_bytes(&mut self) -> Vec<u8> {
        let meta = &mut self.model.metadata;
        meta.insert(META_EPOCHS.into(), self.epoch.to_string());
        meta.insert(META_ITERATION.into(), self.iteration.to_string());
        meta.insert(
            META_HISTORY.into(),
            serde_json::to_string(&self.log.epochs).expect("records serialize"),
        );
        meta.insert(META_CONFIG.into(), self.config.to_key_values().to_text());
        encode_checkpoint(&self.model, Some(&self.optimizer))
    }

    /// Runs the remaining epochs. Every epoch writes
    /// `epoch_NNNN.ckpt` (with optimizer state) into `out_dir`, rewrites
    /// the validation CSV, appends to the loss CSV and updates the
    /// [`BEST_MARKER`] file. On a non-finite loss the run stops and the
    /// error names the last checkpoint written.
    pub fn fit(
        &mut self,
        train: &[ImagePair],
        valid: &[ImagePair],
        out_dir: &Path,
    ) -> Result<FitOutcome, TrainError> {
        if valid.is_empty() {
            return Err(TrainError::EmptyValidation);
        }
        fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
        write_file(
            &out_dir.join(CONFIG_FILE),
            self.config.to_key_values().to_text().as_bytes(),
        )?;
        let loss_path = out_dir.join(LOSS_CSV);
        if self.epoch == 0 || !loss_path.exists() {
            write_file(&loss_path, b"iteration,loss\n")?;
        }

        let mut checkpoints = Vec::new();
        let mut last_good: Option<PathBuf> = self
            .epoch
            .checked_sub(1)
            .map(|e| out_dir.join(checkpoint_name(e)))
            .filter(|p| p.exists());
        while self.epoch < self.config.epochs {
            let first_loss = self.log.losses.len();
            let record = match self.run_epoch(train, valid) {
                Ok(r) => r,
                Err(TrainError::NonFiniteLoss {
                    epoch, iteration, ..
                }) => {
                    return Err(TrainError::NonFiniteLoss {
                        epoch,
                        iteration,
                        last_good: last_good.map(|p| p.display().to_string()),
                    })
                }
                Err(e) => return Err(e),
            };
            log::info!(
                "epoch {} lr {:.3e} loss {:.6} val_psnr {:.4} ({:.1}s)",
                record.epoch,
                record.lr,
                record.mean_loss,
                record.val_psnr,
                record.seconds
            );

            let path = out_dir.join(checkpoint_name(record.epoch));
            let bytes = self.checkpoint_bytes();
            crate::fsutil::write_atomic(&path, &bytes).map_err(|source| CheckpointError::Io {
                path: path.display().to_string(),
                source,
            })?;
            checkpoints.push(path.clone());
            last_good = Some(path);

            let mut lines = String::new();
            for (i, l) in &self.log.losses[first_loss..] {
                lines.push_str(&format!("{i},{l}\n"));
            }
            append_file(&loss_path, lines.as_bytes())?;
            write_file(
                &out_dir.join(VALIDATION_CSV),
                self.log.validation_csv().as_bytes(),
            )?;
            let best = self.log.best().expect("at least one epoch").clone();
            write_file(
                &out_dir.join(BEST_MARKER),
                format!(
                    "epoch={}\nval_psnr={}\ncheckpoint={}\n",
                    best.epoch,
                    best.val_psnr,
                    checkpoint_name(best.epoch)
                )
                .as_bytes(),
            )?;
        }

        let best = self
            .log
            .best()
            .ok_or_else(|| TrainError::Config("no epochs were run".into()))?;
        Ok(FitOutcome {
            best_epoch: best.epoch,
            best_psnr: best.val_psnr,
            best_checkpoint: out_dir.join(checkpoint_name(best.epoch)),
            checkpoints,
        })
    }
}

pub fn checkpoint_name(epoch: usize) -> String {
    format!("epoch_{epoch:04}.ckpt")
}

fn mse<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> f64 {
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x.f64() - y.f64();
            d * d
        })
        .sum();
    sum / a.len() as f64
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), TrainError> {
    crate::fsutil::write_atomic(path, bytes).map_err(io_err(path))
}

fn append_file(path: &Path, bytes: &[u8]) -> Result<(), TrainError> {
    OpenOptions::new()
        .append(true)
        .create(true)
        .open(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(io_err(path))
}
