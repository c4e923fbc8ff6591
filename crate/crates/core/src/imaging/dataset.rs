//! LR/HR pair synthesis, the on-disk dataset layout and crop sampling.
//!
//! A prepared dataset looks like
//!
//! ```text
//! <root>/manifest.txt                       one relative image path per line
//! <root>/<split>/HR/<name>.png
//! <root>/<split>/LR_bicubic/<name>.png      + <name>.json provenance
//! <root>/<split>/LR_unknown/<name>.png      + <name>.json provenance
//! ```
//!
//! with `<split>` one of `train`, `valid`, `test`.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{
    augment, read_image, resize, write_image, AugmentDraw, AugmentSpec, GrayImage, ImageError,
    KernelKind, ResampleKernel,
};
use crate::fsutil::write_atomic;
use crate::real::Real;
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

pub const SPLITS: [&str; 3] = ["train", "valid", "test"];
pub const MANIFEST: &str = "manifest.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DownsampleMode {
    /// Always the antialiased bicubic kernel.
    Bicubic,
    /// A kernel drawn uniformly per image.
    Unknown,
}

impl DownsampleMode {
    pub fn name(self) -> &'static str {
        match self {
            DownsampleMode::Bicubic => "bicubic",
            DownsampleMode::Unknown => "unknown",
        }
    }

    /// Directory holding this mode's LR images.
    pub fn folder(self) -> String {
        format!("LR_{}", self.name())
    }
}

impl fmt::Display for DownsampleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DownsampleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bicubic" => Ok(DownsampleMode::Bicubic),
            "unknown" => Ok(DownsampleMode::Unknown),
            _ => Err(format!("unknown mode `{s}` (expected bicubic or unknown)")),
        }
    }
}

/// LR-grid position of a crop within image `image` of a pair list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropOrigin {
    pub image: usize,
    pub x: usize,
    pub y: usize,
}

impl CropOrigin {
    /// The matching HR origin.
    pub fn hr(&self, scale: usize) -> (usize, usize) {
        (self.x * scale, self.y * scale)
    }
}

/// How an LR image was derived from its HR source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub scale: usize,
    pub mode: DownsampleMode,
    pub kernel: KernelKind,
    pub antialias: bool,
    pub source_size: (usize, usize),
    pub hr_size: (usize, usize),
    pub augmentation: Option<AugmentDraw>,
    pub crop_origin: Option<CropOrigin>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub lr: GrayImage,
    pub hr: GrayImage,
    pub provenance: Provenance,
}

impl SamplePair {
    /// Degrades the LR image in place and records the draw.
    pub fn augment(&mut self, spec: &AugmentSpec, rng: &mut Rng) {
        let (lr, draw) = augment(&self.lr, spec, rng);
        self.lr = lr;
        self.provenance.augmentation = Some(draw);
    }
}

/// Downsamples `hr` by `scale`. Sizes not divisible by `scale` are cropped
/// from the bottom/right first, with a warning in the provenance.
pub fn make_lr(
    hr: &GrayImage,
    source: &str,
    scale: usize,
    mode: DownsampleMode,
    rng: &mut Rng,
) -> Result<SamplePair, ImageError> {
    if scale == 0 {
        return Err(ImageError::InvalidFactor(0.0));
    }
    let (w, h) = (
        hr.width() - hr.width() % scale,
        hr.height() - hr.height() % scale,
    );
    if w == 0 || h == 0 {
        return Err(ImageError::EmptyOutput {
            width: w / scale,
            height: h / scale,
        });
    }
    let mut warnings = Vec::new();
    let source_size = (hr.width(), hr.height());
    let hr = if (w, h) != (hr.width(), hr.height()) {
        warnings.push(format!(
            "{}x{} is not divisible by {scale}; cropped to {w}x{h}",
            hr.width(),
            hr.height()
        ));
        hr.crop(0, 0, w, h)
    } else {
        hr.clone()
    };
    let kernel = match mode {
        DownsampleMode::Bicubic => KernelKind::Bicubic,
        DownsampleMode::Unknown => KernelKind::ALL[rng.gen_range(0..KernelKind::ALL.len())],
    };
    let lr = resize(&hr, 1.0 / scale as f64, ResampleKernel::new(kernel))?.clamp();
    debug_assert_eq!((lr.width() * scale, lr.height() * scale), (w, h));
    let provenance = Provenance {
        source: source.to_string(),
        scale,
        mode,
        kernel,
        antialias: true,
        source_size,
        hr_size: (w, h),
        augmentation: None,
        crop_origin: None,
        warnings,
    };
    Ok(SamplePair { lr, hr, provenance })
}

/// A loaded LR/HR pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePair {
    pub name: String,
    pub lr: GrayImage,
    pub hr: GrayImage,
}

impl ImagePair {
    /// Integer ratio between HR and LR sizes, if consistent.
    pub fn scale(&self) -> Option<usize> {
        let (lw, lh) = (self.lr.width(), self.lr.height());
        if lw == 0 || lh == 0 {
            return None;
        }
        let s = self.hr.width() / lw;
        (s > 0 && self.hr.width() == s * lw && self.hr.height() == s * lh).then_some(s)
    }
}

fn dataset_err(msg: impl Into<String>) -> ImageError {
    ImageError::Dataset(msg.into())
}

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm"))
}

/// Image files (by extension) directly inside `dir`, sorted by path.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>, ImageError> {
    let entries = fs::read_dir(dir).map_err(|source| ImageError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads the manifest, if any.
fn read_manifest(root: &Path) -> Result<Option<Vec<String>>, ImageError> {
    let path = root.join(MANIFEST);
    match fs::read_to_string(&path) {
        Ok(text) => Ok(Some(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect(),
        )),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(ImageError::Io {
            path: path.display().to_string(),
            source,
        }),
    }
}

/// Loads the pairs of one split, ordered by the manifest (or by file name
/// when there is none). Every pair must have HR size `scale` x LR size.
pub fn load_split(
    root: &Path,
    split: &str,
    mode: DownsampleMode,
    scale: usize,
) -> Result<Vec<ImagePair>, ImageError> {
    let hr_prefix = format!("{split}/HR/");
    let names: Vec<String> = match read_manifest(root)? {
        Some(lines) => lines
            .iter()
            .filter_map(|l| l.strip_prefix(&hr_prefix))
            .map(String::from)
            .collect(),
        None => list_images(&root.join(split).join("HR"))?
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
    };
    if names.is_empty() {
        return Err(dataset_err(format!(
            "{}: split `{split}` has no images",
            root.display()
        )));
    }
    names
        .into_iter()
        .map(|file| {
            let hr = read_image(&root.join(split).join("HR").join(&file))?;
            let lr = read_image(&root.join(split).join(mode.folder()).join(&file))?;
            let pair = ImagePair { name: file, lr, hr };
            if pair.scale() != Some(scale) {
                return Err(dataset_err(format!(
                    "{split}/{}: HR {}x{} is not {scale}x LR {}x{}",
                    pair.name,
                    pair.hr.width(),
                    pair.hr.height(),
                    pair.lr.width(),
                    pair.lr.height()
                )));
            }
            Ok(pair)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrepareOptions {
    pub scale: usize,
    pub mode: DownsampleMode,
    pub augment: Option<AugmentSpec>,
    pub seed: u64,
    /// Split used when the source directory is flat.
    pub split: String,
}

/// Files written by [`prepare_dataset`], relative to the output root.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrepareSummary {
    pub images: usize,
    pub written: Vec<String>,
    pub warnings: Vec<String>,
}

/// Builds the dataset layout from a directory of HR slices. The source is
/// either flat or already split into `train`/`valid`/`test` directories.
pub fn prepare_dataset(
    hr_dir: &Path,
    out_dir: &Path,
    options: &PrepareOptions,
) -> Result<PrepareSummary, ImageError> {
    if let Some(spec) = &options.augment {
        spec.validate()?;
    }
    let mut sources: Vec<(String, Vec<PathBuf>)> = Vec::new();
    for split in SPLITS {
        let dir = hr_dir.join(split);
        if dir.is_dir() {
            sources.push((split.to_string(), list_images(&dir)?));
        }
    }
    if sources.is_empty() {
        sources.push((options.split.clone(), list_images(hr_dir)?));
    }
    if sources.iter().all(|(_, files)| files.is_empty()) {
        return Err(dataset_err(format!(
            "{}: no PNG or PGM images found",
            hr_dir.display()
        )));
    }

    let mut summary = PrepareSummary::default();
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ImageError::Io { path, source }
    };
    for (split_index, (split, files)) in sources.iter().enumerate() {
        let hr_out = out_dir.join(split).join("HR");
        let lr_out = out_dir.join(split).join(options.mode.folder());
        fs::create_dir_all(&hr_out).map_err(io(&hr_out))?;
        fs::create_dir_all(&lr_out).map_err(io(&lr_out))?;
        for (i, file) in files.iter().enumerate() {
            let index = (split_index as u64) << 32 | i as u64;
            let name = format!("{}.png", stem(file));
            let source = read_image(file)?;
            let mut pair = make_lr(
                &source,
                &file.display().to_string(),
                options.scale,
                options.mode,
                &mut rng::indexed_substream(options.seed, rng::stream::PREPARE, index),
            )?;
            if let Some(spec) = &options.augment {
                pair.augment(
                    spec,
                    &mut rng::indexed_substream(options.seed, rng::stream::AUGMENT, index),
                );
            }
            pair.lr = pair.lr.with_max_value(source.max_value());
            write_image(&pair.hr, &hr_out.join(&name))?;
            write_image(&pair.lr, &lr_out.join(&name))?;
            let json_path = lr_out.join(format!("{}.json", stem(file)));
            let json = serde_json::to_vec_pretty(&pair.provenance).expect("provenance serializes");
            write_atomic(&json_path, &json).map_err(io(&json_path))?;
            for w in &pair.provenance.warnings {
                log::warn!("{}: {w}", file.display());
                summary.warnings.push(format!("{}: {w}", file.display()));
            }
            summary.written.push(format!("{split}/HR/{name}"));
            summary
                .written
                .push(format!("{split}/{}/{name}", options.mode.folder()));
            summary.images += 1;
        }
    }

    let mut lines: BTreeSet<String> = read_manifest(out_dir)?
        .unwrap_or_default()
        .into_iter()
        .collect();
    lines.extend(summary.written.iter().cloned());
    let mut text = lines.into_iter().collect::<Vec<_>>().join("\n");
    text.push('\n');
    let manifest = out_dir.join(MANIFEST);
    write_atomic(&manifest, text.as_bytes()).map_err(io(&manifest))?;
    Ok(summary)
}

/// LR and HR crop tensors plus where they were taken.
#[derive(Clone, Debug)]
pub struct CropBatch<T> {
    pub lr: Tensor<T>,
    pub hr: Tensor<T>,
    pub origins: Vec<CropOrigin>,
}

/// Draws `batch` aligned crops: image uniformly among those large enough,
/// then a uniform LR origin. The HR window is the LR window scaled by
/// `scale`. Undersized images are skipped with a warning.
pub fn sample_crops(
    pairs: &[ImagePair],
    batch: usize,
    lr_crop: usize,
    scale: usize,
    rng: &mut Rng,
) -> Result<Vec<(GrayImage, GrayImage, CropOrigin)>, ImageError> {
    let eligible: Vec<usize> = (0..pairs.len())
        .filter(|&i| {
            let ok = pairs[i].lr.width() >= lr_crop && pairs[i].lr.height() >= lr_crop;
            if !ok {
                log::warn!(
                    "skipping {}: LR image smaller than the {lr_crop}px crop",
                    pairs[i].name
                );
            }
            ok
        })
        .collect();
    if eligible.is_empty() {
        return Err(dataset_err(format!(
            "no image is at least {lr_crop}x{lr_crop} at LR resolution"
        )));
    }
    Ok((0..batch)
        .map(|_| {
            let image = eligible[rng.gen_range(0..eligible.len())];
            let p = &pairs[image];
            let x = rng.gen_range(0..=p.lr.width() - lr_crop);
            let y = rng.gen_range(0..=p.lr.height() - lr_crop);
            let origin = CropOrigin { image, x, y };
            let (hx, hy) = origin.hr(scale);
            (
                p.lr.crop(x, y, lr_crop, lr_crop),
                p.hr.crop(hx, hy, lr_crop * scale, lr_crop * scale),
                origin,
            )
        })
        .collect())
}

pub fn sample_crop_batch<T: Real>(
    pairs: &[ImagePair],
    batch: usize,
    lr_crop: usize,
    scale: usize,
    rng: &mut Rng,
) -> Result<CropBatch<T>, ImageError> {
    let crops = sample_crops(pairs, batch, lr_crop, scale, rng)?;
    let lr: Vec<&GrayImage> = crops.iter().map(|c| &c.0).collect();
    let hr: Vec<&GrayImage> = crops.iter().map(|c| &c.1).collect();
    Ok(CropBatch {
        lr: super::images_to_tensor(&lr),
        hr: super::images_to_tensor(&hr),
        origins: crops.iter().map(|c| c.2).collect(),
    })
}
