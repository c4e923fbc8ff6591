//! Image-pair metrics, aggregates, difference maps, histograms and the
//! edge/texture measures used to compare reconstructions.
//!
//! MSE is `(1/N) * sum (a_i - b_i)^2`. PSNR is
//! `10 * log10(range^2 / MSE)` where `range` is by default the joint data
//! range `max(a, b) - min(a, b)` of both images.

mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::imaging::{GrayImage, ImageError};

pub use report::{read_scores_csv, summary_json, write_histogram_csv, write_scores_csv};

/// Squared-error mean of two equally sized slices.
pub fn mse_values(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "mse of unequal lengths");
    let total: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    total / a.len() as f64
}

pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64, ImageError> {
    a.same_size(b, "mse")?;
    Ok(mse_values(a.pixels(), b.pixels()))
}

/// Peak used in the PSNR numerator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum PsnrRange {
    /// `max(a, b) - min(a, b)` over both images.
    #[default]
    Joint,
    /// A fixed peak, e.g. `1.0` for images normalized to `[0, 1]`.
    Fixed(f64),
}

fn psnr_from(range: f64, mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else if range == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (range * range / mse).log10()
    }
}

/// PSNR in dB with the joint data range. Identical images give `+inf`.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64, ImageError> {
    psnr_with(a, b, PsnrRange::Joint)
}

pub fn psnr_with(a: &GrayImage, b: &GrayImage, range: PsnrRange) -> Result<f64, ImageError> {
    a.same_size(b, "psnr")?;
    Ok(psnr_values(a.pixels(), b.pixels(), range))
}

pub fn psnr_values(a: &[f64], b: &[f64], range: PsnrRange) -> f64 {
    let peak = match range {
        PsnrRange::Joint => {
            let (lo, hi) = a
                .iter()
                .chain(b)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            hi - lo
        }
        PsnrRange::Fixed(p) => p,
    };
    psnr_from(peak, mse_values(a, b))
}

/// One scored image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub path: String,
    pub method: String,
    pub mse: f64,
    pub psnr: f64,
}

/// Population mean and variance of finite PSNRs for one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// Images included in the mean and variance.
    pub count: usize,
    /// Images left out because their PSNR was infinite.
    pub infinite: usize,
    pub mean_psnr: f64,
    pub var_psnr: f64,
}

/// Population mean and variance of the finite values, and how many
/// non-finite values were skipped. `None` when nothing finite remains.
pub fn mean_variance(values: &[f64]) -> (Option<(f64, f64)>, usize) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let skipped = values.len() - finite.len();
    if finite.is_empty() {
        return (None, skipped);
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (Some((mean, var)), skipped)
}

/// Summaries per method, in order of first appearance. Methods whose every
/// PSNR is infinite report `NaN` mean and variance.
pub fn aggregate(scores: &[ImageScore]) -> Vec<MethodSummary> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in scores {
        if !groups.contains_key(s.method.as_str()) {
            order.push(&s.method);
        }
        groups.entry(&s.method).or_default().push(s.psnr);
    }
    order
        .into_iter()
        .map(|m| {
            let values = &groups[m];
            let (stats, infinite) = mean_variance(values);
            let (mean_psnr, var_psnr) = stats.unwrap_or((f64::NAN, f64::NAN));
            MethodSummary {
                method: m.to_string(),
                count: values.len() - infinite,
                infinite,
                mean_psnr,
                var_psnr,
            }
        })
        .collect()
}

/// Per-pixel `|a - b|`.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceMap {
    pub raw: GrayImage,
    pub max: f64,
}

impl DifferenceMap {
    /// Scales `[0, max]` onto `[0, 1]`; an all-zero map stays zero.
    pub fn display(&self) -> GrayImage {
        let mut img = self.raw.clone();
        if self.max > 0.0 {
            img.pixels_mut().iter_mut().for_each(|v| *v /= self.max);
        }
        img
    }

    pub fn mean(&self) -> f64 {
        self.raw.pixels().iter().sum::<f64>() / self.raw.len().max(1) as f64
    }

    /// Mean over pixels where `mask` is true.
    pub fn masked_mean(&self, mask: &[bool]) -> f64 {
        masked_mean(self.raw.pixels(), mask)
    }
}

pub fn difference_map(a: &GrayImage, b: &GrayImage) -> Result<DifferenceMap, ImageError> {
    a.same_size(b, "difference map")?;
    let pixels: Vec<f64> = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y).abs())
        .collect();
    let max = pixels.iter().copied().fold(0.0, f64::max);
    Ok(DifferenceMap {
        raw: GrayImage::new(a.width(), a.height(), pixels)?.with_max_value(a.max_value()),
        max,
    })
}

pub fn masked_mean(values: &[f64], mask: &[bool]) -> f64 {
    let (sum, n) = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    sum / n.max(1) as f64
}

/// Counts over `bins` uniform bins on `[0, 1]`; values outside are clamped
/// into the end bins.
pub fn histogram(img: &GrayImage, bins: usize) -> Result<Vec<u64>, ImageError> {
    if bins < 2 {
        return Err(ImageError::Dataset(format!(
            "histogram needs at least 2 bins, got {bins}"
        )));
    }
    let mut counts = vec![0u64; bins];
    for &v in img.pixels() {
        let i = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(counts)
}

/// Valley-to-peak ratio of a two-phase histogram: the lowest smoothed count
/// between the two dominant peaks divided by the smaller peak. Lower means
/// better separated phases. Returns `1.0` when there is no second peak.
pub fn valley_to_peak(counts: &[u64]) -> f64 {
    let n = counts.len();
    let half = (n / 64).max(1);
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(half), (i + half).min(n - 1));
            counts[lo..=hi].iter().sum::<u64>() as f64 / (hi - lo + 1) as f64
        })
        .collect();
    let Some(p1) = (0..n).max_by(|&a, &b| smooth[a].total_cmp(&smooth[b]).then(b.cmp(&a))) else {
        return 1.0;
    };
    let separation = (n / 16).max(2);
    let is_local_max = |i: usize| {
        (i == 0 || smooth[i] >= smooth[i - 1])
            && (i + 1 == n || smooth[i] >= smooth[i + 1])
            && smooth[i] > 0.0
    };
    let p2 = (0..n)
        .filter(|&i| i.abs_diff(p1) >= separation && is_local_max(i))
        .max_by(|&a, &b| smooth[a].total_cmp(&smooth[b]).then(b.cmp(&a)));
    let Some(p2) = p2 else { return 1.0 };
    let (lo, hi) = (p1.min(p2), p1.max(p2));
    let valley = smooth[lo..=hi]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    valley / smooth[p1].min(smooth[p2])
}

/// Sobel gradient magnitude with replicated borders.
pub fn sobel_magnitude(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let at = |x: isize, y: isize| {
        img.get(
            x.clamp(0, w as isize - 1) as usize,
            y.clamp(0, h as isize - 1) as usize,
        )
    };
    GrayImage::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        let gx = at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
            - at(x - 1, y - 1)
            - 2.0 * at(x - 1, y)
            - at(x - 1, y + 1);
        let gy = at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
            - at(x - 1, y - 1)
            - 2.0 * at(x, y - 1)
            - at(x + 1, y - 1);
        (gx * gx + gy * gy).sqrt()
    })
}

/// Pixels whose Sobel magnitude exceeds `threshold`, grown by `dilate`
/// pixels in every direction.
pub fn edge_mask(img: &GrayImage, threshold: f64, dilate: usize) -> Vec<bool> {
    let mag = sobel_magnitude(img);
    let (w, h) = (img.width(), img.height());
    let edges: Vec<bool> = mag.pixels().iter().map(|&m| m > threshold).collect();
    let d = dilate as isize;
    (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            (-d..=d).any(|dy| {
                (-d..=d).any(|dx| {
                    let (nx, ny) = (x + dx, y + dy);
                    nx >= 0
                        && ny >= 0
                        && nx < w as isize
                        && ny < h as isize
                        && edges[ny as usize * w + nx as usize]
                })
            })
        })
        .collect()
}

/// Mean absolute difference between horizontally and vertically adjacent
/// pixels, counting only pairs where neither pixel is marked in `edges`.
pub fn intra_region_roughness(img: &GrayImage, edges: &[bool]) -> f64 {
    let (w, h) = (img.width(), img.height());
    assert_eq!(edges.len(), w * h, "edge mask size");
    let (mut sum, mut n) = (0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if edges[i] {
                continue;
            }
            for j in [(x + 1 < w).then(|| i + 1), (y + 1 < h).then(|| i + w)]
                .into_iter()
                .flatten()
            {
                if !edges[j] {
                    sum += (img.pixels()[i] - img.pixels()[j]).abs();
                    n += 1;
                }
            }
        }
    }
    sum / n.max(1) as f64
}
