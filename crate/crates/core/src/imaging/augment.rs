//! Gaussian blur followed by additive Gaussian noise.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GrayImage, ImageError};
use crate::rng::Rng;

/// Ranges the per-image blur sigma and noise variance are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub blur_sigma: (f64, f64),
    pub noise_variance: (f64, f64),
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            blur_sigma: (0.0, 1.0),
            noise_variance: (0.0, 0.005),
        }
    }
}

/// The blur and noise actually applied to one image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentDraw {
    pub sigma: f64,
    pub variance: f64,
}

fn draw_in(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

impl AugmentSpec {
    /// No blur and no noise.
    pub fn none() -> Self {
        AugmentSpec {
            blur_sigma: (0.0, 0.0),
            noise_variance: (0.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<(), ImageError> {
        for (name, (lo, hi)) in [
            ("blur sigma", self.blur_sigma),
            ("noise variance", self.noise_variance),
        ] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(ImageError::Augment(format!("{name} range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn draw(&self, rng: &mut Rng) -> AugmentDraw {
        AugmentDraw {
            sigma: draw_in(rng, self.blur_sigma),
            variance: draw_in(rng, self.noise_variance),
        }
    }
}

fn mirror(i: isize, len: usize) -> usize {
    let period = 2 * len as isize;
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Separable Gaussian blur truncated at `3 sigma` with symmetric boundary
/// extension. `sigma <= 0` returns the image unchanged.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 || img.is_empty() {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|t| (-((t * t) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);

    let (w, h) = (img.width(), img.height());
    let mut mid = vec![0.0; w * h];
    for y in 0..h {
        let row = img.row(y);
        for x in 0..w {
            mid[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, &t)| t * row[mirror(x as isize + k as isize - radius, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (k, &t) in taps.iter().enumerate() {
            let src = mirror(y as isize + k as isize - radius, h);
            let (dst, src) = (&mut out[y * w..(y + 1) * w], &mid[src * w..(src + 1) * w]);
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += t * s);
        }
    }
    GrayImage::new(w, h, out)
        .expect("same size")
        .with_max_value(img.max_value())
}

/// Adds zero-mean Gaussian noise of the given variance without clamping.
pub fn add_noise(img: &GrayImage, variance: f64, rng: &mut Rng) -> GrayImage {
    let mut out = img.clone();
    if variance > 0.0 {
        let normal = Normal::new(0.0, variance.sqrt()).expect("finite deviation");
        out.pixels_mut()
            .iter_mut()
            .for_each(|v| *v += normal.sample(rng));
    }
    out
}

/// Blur, then noise, then clamp to `[0, 1]`.
pub fn apply_augment(img: &GrayImage, draw: AugmentDraw, rng: &mut Rng) -> GrayImage {
    add_noise(&gaussian_blur(img, draw.sigma), draw.variance, rng).clamp()
}

/// Draws blur and noise strengths from `spec` and applies them.
pub fn augment(img: &GrayImage, spec: &AugmentSpec, rng: &mut Rng) -> (GrayImage, AugmentDraw) {
    let draw = spec.draw(rng);
    (apply_augment(img, draw, rng), draw)
}
