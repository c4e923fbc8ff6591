//! Grayscale images, resampling, augmentation, file I/O and LR/HR pairs.

mod augment;
mod dataset;
mod io;
mod resample;

use thiserror::Error;

use crate::real::Real;
use crate::tensor::{Shape, Tensor};

pub use augment::{add_noise, apply_augment, augment, gaussian_blur, AugmentDraw, AugmentSpec};
pub use dataset::{
    list_images, load_split, make_lr, prepare_dataset, sample_crop_batch, sample_crops, CropBatch,
    CropOrigin, DownsampleMode, ImagePair, PrepareOptions, PrepareSummary, Provenance, SamplePair,
    MANIFEST, SPLITS,
};
pub use io::{read_image, read_image_with, write_image, ReadOptions};
pub use resample::{resize, resize_to, KernelKind, ResampleKernel};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("{op}: image sizes differ ({a_width}x{a_height} vs {b_width}x{b_height})")]
    SizeMismatch {
        op: &'static str,
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },
    #[error("pixel buffer holds {actual} values, {width}x{height} needs {expected}", expected = width * height)]
    Length {
        width: usize,
        height: usize,
        actual: usize,
    },
    #[error("resize to {width}x{height}: output must be at least 1x1")]
    EmptyOutput { width: usize, height: usize },
    #[error("invalid resize factor {0}")]
    InvalidFactor(f64),
    #[error(
        "{path}: {reason}; supported formats are 8- or 16-bit grayscale PNG and binary PGM (P5)"
    )]
    Unsupported { path: String, reason: String },
    #[error("{path}: malformed image: {reason}")]
    Malformed { path: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Dataset(String),
    #[error("invalid augmentation ranges: {0}")]
    Augment(String),
}

/// A single-channel image with values in `[0, 1]`.
///
/// `max_value` is the integer full scale of the source (255 for 8-bit,
/// 65535 for 16-bit) and is used when the image is written back.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    max_value: u16,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if pixels.len() != width * height {
            return Err(ImageError::Length {
                width,
                height,
                actual: pixels.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
            max_value: 255,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
            max_value: 255,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        GrayImage {
            width,
            height,
            pixels,
            max_value: 255,
        }
    }

    pub fn with_max_value(mut self, max_value: u16) -> Self {
        self.max_value = max_value.max(1);
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn max_value(&self) -> u16 {
        self.max_value
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// The `width`x`height` window whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> GrayImage {
        assert!(
            x + width <= self.width && y + height <= self.height,
            "crop window outside image"
        );
        let mut pixels = Vec::with_capacity(width * height);
        for r in y..y + height {
            pixels.extend_from_slice(&self.row(r)[x..x + width]);
        }
        GrayImage {
            width,
            height,
            pixels,
            max_value: self.max_value,
        }
    }

    pub fn clamp(mut self) -> Self {
        self.pixels.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        self
    }

    /// Clamps and rounds to the integer grid of `max_value`.
    pub fn quantized(&self) -> GrayImage {
        let m = self.max_value as f64;
        let pixels = self
            .pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * m).round() / m)
            .collect();
        GrayImage {
            width: self.width,
            height: self.height,
            pixels,
            max_value: self.max_value,
        }
    }

    pub fn same_size(&self, other: &GrayImage, op: &'static str) -> Result<(), ImageError> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(ImageError::SizeMismatch {
                op,
                a_width: self.width,
                a_height: self.height,
                b_width: other.width,
                b_height: other.height,
            });
        }
        Ok(())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// A `1x1xHxW` tensor.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        images_to_tensor(&[self])
    }

    /// Channel 0 of batch entry `b`, clamped to `[0, 1]`.
    pub fn from_tensor<T: Real>(t: &Tensor<T>, b: usize) -> GrayImage {
        let s = t.shape();
        let plane = &t.image(b)[..s.plane()];
        GrayImage {
            width: s.width,
            height: s.height,
            pixels: plane.iter().map(|v| v.f64().clamp(0.0, 1.0)).collect(),
            max_value: 255,
        }
    }
}

/// Stacks equally sized images into an `Nx1xHxW` tensor.
pub fn images_to_tensor<T: Real>(images: &[&GrayImage]) -> Tensor<T> {
    let (w, h) = images.first().map_or((0, 0), |i| (i.width, i.height));
    let mut data = Vec::with_capacity(images.len() * w * h);
    for img in images {
        assert_eq!(
            (img.width, img.height),
            (w, h),
            "batched images must share a size"
        );
        data.extend(img.pixels.iter().map(|&v| T::lit(v)));
    }
    Tensor::from_vec(Shape::new(images.len(), 1, h, w), data).expect("batch length")
}
