//! Single-image super-resolution for grayscale micro-CT slices.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense NCHW tensors, the convolution / activation /
//!   batch-norm / depth-to-space kernels with their hand-written backward
//!   passes, weight normalization and the Adam optimizer.
//! - [`models`]: SR-ResNet, EDSR, WDSR-A and WDSR-B graph builders, the graph
//!   executor and the checkpoint format.
//! - [`imaging`]: grayscale images, `imresize`-style resampling kernels,
//!   blur/noise augmentation, LR/HR pair synthesis and crop sampling.
//! - [`metrics`]: MSE, joint-range PSNR, aggregates, difference maps and
//!   histograms.
//! - [`train`]: the training loop with the half-life learning-rate schedule,
//!   full-image validation and best-epoch retention.

pub mod config;
pub mod exec;
mod fsutil;
pub mod imaging;
pub mod metrics;
pub mod models;
pub mod real;
pub mod rng;
pub mod tensor;
pub mod train;

pub use models::{Family, ModelGraph, ModelSpec};
pub use real::Real;
pub use tensor::{Shape, Tensor};
pub use train::{lr_at, TrainConfig, TrainLog, Trainer};
