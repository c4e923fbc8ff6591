//! Separable resampling in the style of MATLAB's `imresize`.
//!
//! Output pixel `x` (1-based) maps to input coordinate
//! `u = x / s + (1 - 1 / s) / 2`. When shrinking with antialiasing the kernel
//! is stretched to `s * k(s * t)` and its support widened by `1 / s`. Taps
//! falling outside the image are mirrored (symmetric extension) and the
//! weights of every output pixel are normalized to sum to one.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{GrayImage, ImageError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Box,
    Triangle,
    Bicubic,
    Lanczos2,
    Lanczos3,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] = [
        KernelKind::Box,
        KernelKind::Triangle,
        KernelKind::Bicubic,
        KernelKind::Lanczos2,
        KernelKind::Lanczos3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Box => "box",
            KernelKind::Triangle => "triangle",
            KernelKind::Bicubic => "bicubic",
            KernelKind::Lanczos2 => "lanczos2",
            KernelKind::Lanczos3 => "lanczos3",
        }
    }

    /// Full support width at unit scale.
    pub fn width(self) -> f64 {
        match self {
            KernelKind::Box => 1.0,
            KernelKind::Triangle => 2.0,
            KernelKind::Bicubic | KernelKind::Lanczos2 => 4.0,
            KernelKind::Lanczos3 => 6.0,
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            KernelKind::Box => {
                if (-0.5..0.5).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            KernelKind::Triangle => (1.0 - a).max(0.0),
            KernelKind::Bicubic => {
                // Keys, a = -0.5.
                if a <= 1.0 {
                    1.5 * a * a * a - 2.5 * a * a + 1.0
                } else if a <= 2.0 {
                    -0.5 * a * a * a + 2.5 * a * a - 4.0 * a + 2.0
                } else {
                    0.0
                }
            }
            KernelKind::Lanczos2 => lanczos(x, 2.0),
            KernelKind::Lanczos3 => lanczos(x, 3.0),
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn lanczos(x: f64, radius: f64) -> f64 {
    if x.abs() < radius {
        sinc(x) * sinc(x / radius)
    } else {
        0.0
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cubic" => Ok(KernelKind::Bicubic),
            other => KernelKind::ALL
                .into_iter()
                .find(|k| k.name() == other)
                .ok_or_else(|| format!("unknown kernel `{s}` (expected box, triangle, bicubic, lanczos2, lanczos3)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleKernel {
    pub kind: KernelKind,
    pub antialias: bool,
}

impl ResampleKernel {
    pub fn new(kind: KernelKind) -> Self {
        ResampleKernel {
            kind,
            antialias: true,
        }
    }

    pub fn bicubic() -> Self {
        Self::new(KernelKind::Bicubic)
    }
}

/// Taps and weights of one output pixel.
struct Contribution {
    taps: Vec<usize>,
    weights: Vec<f64>,
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

fn contributions(
    in_len: usize,
    out_len: usize,
    scale: f64,
    kernel: ResampleKernel,
) -> Vec<Contribution> {
    let shrink = kernel.antialias && scale < 1.0;
    let width = if shrink {
        kernel.kind.width() / scale
    } else {
        kernel.kind.width()
    };
    let h = |t: f64| {
        if shrink {
            scale * kernel.kind.eval(scale * t)
        } else {
            kernel.kind.eval(t)
        }
    };
    let taps = width.ceil() as isize + 2;
    (1..=out_len)
        .map(|x| {
            let u = x as f64 / scale + 0.5 * (1.0 - 1.0 / scale);
            let left = (u - width / 2.0).floor() as isize;
            let mut c = Contribution {
                taps: Vec::new(),
                weights: Vec::new(),
            };
            for j in left..left + taps {
                let w = h(u - j as f64);
                if w != 0.0 {
                    c.taps.push(mirror(j - 1, in_len));
                    c.weights.push(w);
                }
            }
            let sum: f64 = c.weights.iter().sum();
            c.weights.iter_mut().for_each(|w| *w /= sum);
            c
        })
        .collect()
}

/// Resizes by `factor` along both axes. Output sizes are
/// `round(factor * input)`.
pub fn resize(
    img: &GrayImage,
    factor: f64,
    kernel: ResampleKernel,
) -> Result<GrayImage, ImageError> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(ImageError::InvalidFactor(factor));
    }
    let w = (factor * img.width() as f64).round() as usize;
    let h = (factor * img.height() as f64).round() as usize;
    resample(img, w, h, factor, factor, kernel)
}

/// Resizes to an explicit output size; each axis uses its own scale.
pub fn resize_to(
    img: &GrayImage,
    width: usize,
    height: usize,
    kernel: ResampleKernel,
) -> Result<GrayImage, ImageError> {
    let sx = width as f64 / img.width().max(1) as f64;
    let sy = height as f64 / img.height().max(1) as f64;
    resample(img, width, height, sx, sy, kernel)
}

fn resample(
    img: &GrayImage,
    out_w: usize,
    out_h: usize,
    sx: f64,
    sy: f64,
    kernel: ResampleKernel,
) -> Result<GrayImage, ImageError> {
    if out_w < 1 || out_h < 1 || img.is_empty() {
        return Err(ImageError::EmptyOutput {
            width: out_w,
            height: out_h,
        });
    }
    let (in_w, in_h) = (img.width(), img.height());

    // Along rows.
    let cx = contributions(in_w, out_w, sx, kernel);
    let mut mid = vec![0.0; out_w * in_h];
    for y in 0..in_h {
        let row = img.row(y);
        for (x, c) in cx.iter().enumerate() {
            mid[y * out_w + x] = c
                .taps
                .iter()
                .zip(&c.weights)
                .map(|(&t, &w)| row[t] * w)
                .sum();
        }
    }

    // Along columns.
    let cy = contributions(in_h, out_h, sy, kernel);
    let mut out = vec![0.0; out_w * out_h];
    for (y, c) in cy.iter().enumerate() {
        let dst = &mut out[y * out_w..(y + 1) * out_w];
        for (&t, &w) in c.taps.iter().zip(&c.weights) {
            let src = &mid[t * out_w..(t + 1) * out_w];
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += w * s);
        }
    }
    Ok(GrayImage::new(out_w, out_h, out)?.with_max_value(img.max_value()))
}
