use std::fs;
use std::path::{Path, PathBuf};

use rocksr::config::KeyValues;
use rocksr::imaging::{
    list_images, load_split, prepare_dataset, read_image, write_image, AugmentSpec, DownsampleMode,
    GrayImage, ImageError, ImagePair, PrepareOptions,
};
use rocksr::metrics::{
    aggregate, difference_map, histogram, mse, psnr_with, summary_json, valley_to_peak,
    write_histogram_csv, write_scores_csv, ImageScore, PsnrRange,
};
use rocksr::models::{load_checkpoint, read_checkpoint_info, Family, ModelGraph};
use rocksr::real::{DType, Real};
use rocksr::train::{
    bicubic_baseline, super_resolve, validate_with, TrainConfig, Trainer, ValidationReport,
};

use crate::args::*;
use crate::error::CliError;

/// Prints the fully resolved settings of a command.
fn print_config(command: &str, kv: &KeyValues, threads: usize) {
    println!("# rocksr {command}: resolved configuration");
    print!("{}", kv.to_text());
    println!("threads = {threads}");
    println!("#");
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn parse_mode(s: &str) -> Result<DownsampleMode, CliError> {
    s.parse().map_err(CliError::Usage)
}

pub fn prepare(a: &PrepareArgs, threads: usize) -> Result<(), CliError> {
    let options = PrepareOptions {
        scale: a.scale,
        mode: parse_mode(&a.mode)?,
        augment: a.augment.then(AugmentSpec::default),
        seed: a.seed,
        split: a.split.clone(),
    };
    if options.scale < 1 {
        return Err(CliError::Usage("--scale must be at least 1".into()));
    }
    let mut kv = KeyValues::new();
    kv.set("hr_dir", path_str(&a.hr_dir));
    kv.set("out_dir", path_str(&a.out_dir));
    kv.set("scale", options.scale);
    kv.set("mode", options.mode);
    kv.set("augment", a.augment);
    if let Some(spec) = &options.augment {
        kv.set("blur_sigma", format!("{:?}", spec.blur_sigma));
        kv.set("noise_variance", format!("{:?}", spec.noise_variance));
    }
    kv.set("seed", options.seed);
    kv.set("split", &options.split);
    print_config("prepare", &kv, threads);

    let summary = prepare_dataset(&a.hr_dir, &a.out_dir, &options)?;
    for w in &summary.warnings {
        log::warn!("{w}");
    }
    println!(
        "prepared {} images ({} files) in {}",
        summary.images,
        summary.written.len(),
        a.out_dir.display()
    );
    Ok(())
}

pub fn train(a: &TrainArgs, threads: usize) -> Result<(), CliError> {
    let mut kv = match &a.config {
        Some(p) => KeyValues::read(p)?,
        None => KeyValues::new(),
    };
    let mut flags = KeyValues::new();
    if let Some(m) = &a.model {
        m.parse::<Family>()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        flags.set("model", m);
    }
    macro_rules! flag {
        ($field:ident, $key:literal) => {
            if let Some(v) = &a.$field {
                flags.set($key, v);
            }
        };
    }
    flag!(blocks, "blocks");
    flag!(filters, "base_filters");
    flag!(scale, "scale");
    flag!(subset, "subset");
    flag!(epochs, "epochs");
    flag!(iterations, "iterations");
    flag!(batch, "batch");
    flag!(lr_crop, "lr_crop");
    flag!(lr_init, "lr_init");
    flag!(step, "step");
    flag!(seed, "seed");
    flag!(dtype, "dtype");
    if a.augment {
        flags.set("augment", true);
    }
    kv.merge(&flags);
    let config = TrainConfig::from_key_values(&kv)?;
    config.validate()?;

    let mut resolved = config.to_key_values();
    resolved.set("data", path_str(&a.data));
    resolved.set("out", path_str(&a.out));
    if let Some(c) = &a.checkpoint {
        resolved.set("resume", path_str(c));
    }
    print_config("train", &resolved, threads);

    let train = load_split(&a.data, "train", config.mode, config.model.scale)?;
    let valid = load_split(&a.data, "valid", config.mode, config.model.scale)?;
    if train.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: the train split is empty",
            a.data.display()
        )));
    }
    match config.dtype {
        DType::F32 => run_train::<f32>(config, a, &train, &valid),
        DType::F64 => run_train::<f64>(config, a, &train, &valid),
    }
}

fn run_train<T: Real>(
    config: TrainConfig,
    a: &TrainArgs,
    train: &[ImagePair],
    valid: &[ImagePair],
) -> Result<(), CliError> {
    let mut trainer = match &a.checkpoint {
        Some(p) => Trainer::<T>::resume_from(config, p)?,
        None => Trainer::<T>::new(config)?,
    };
    let baseline = bicubic_baseline(valid)?;
    println!("bicubic validation PSNR {:.4} dB", baseline.mean);
    let outcome = trainer.fit(train, valid, &a.out)?;
    for e in &trainer.log.epochs {
        println!(
            "epoch {:>4}  lr {:.3e}  loss {:.6}  val_psnr {:.4}",
            e.epoch, e.lr, e.mean_loss, e.val_psnr
        );
    }
    println!(
        "best epoch {} val_psnr {:.4} dB: {}",
        outcome.best_epoch,
        outcome.best_psnr,
        outcome.best_checkpoint.display()
    );
    Ok(())
}

pub fn validate(a: &ValidateArgs, threads: usize) -> Result<(), CliError> {
    let info = read_checkpoint_info(&a.checkpoint)?;
    let mode = parse_mode(&a.subset)?;
    let mut kv = info.spec.to_key_values();
    kv.set("checkpoint", path_str(&a.checkpoint));
    kv.set("dtype", format!("{:?}", info.dtype).to_lowercase());
    kv.set("data", path_str(&a.data));
    kv.set("subset", mode);
    kv.set("split", &a.split);
    print_config("validate", &kv, threads);

    let pairs = load_split(&a.data, &a.split, mode, info.spec.scale)?;
    let (report, outputs) = match info.dtype {
        DType::F32 => run_validate::<f32>(&a.checkpoint, &pairs)?,
        DType::F64 => run_validate::<f64>(&a.checkpoint, &pairs)?,
    };
    let baseline = bicubic_baseline(&pairs)?;
    println!(
        "images {}\nsr mean PSNR {} dB\nbicubic mean PSNR {} dB",
        pairs.len(),
        report.mean,
        baseline.mean
    );
    if report.infinite > 0 {
        println!(
            "{} images reproduced exactly (infinite PSNR) were excluded",
            report.infinite
        );
    }
    if let Some(out) = &a.out {
        let mut scores = Vec::new();
        for ((pair, sr), (p_sr, p_bic)) in pairs
            .iter()
            .zip(&outputs)
            .zip(report.psnrs.iter().zip(&baseline.psnrs))
        {
            let bic = rocksr::train::bicubic_upscale(&pair.lr, pair.hr.width(), pair.hr.height())?
                .with_max_value(pair.hr.max_value())
                .quantized();
            scores.push(ImageScore {
                path: pair.name.clone(),
                method: "sr".into(),
                mse: mse(sr, &pair.hr)?,
                psnr: *p_sr,
            });
            scores.push(ImageScore {
                path: pair.name.clone(),
                method: "bicubic".into(),
                mse: mse(&bic, &pair.hr)?,
                psnr: *p_bic,
            });
        }
        write_scores_csv(out, &scores).map_err(|e| CliError::io(out, e))?;
    }
    Ok(())
}

fn run_validate<T: Real>(
    checkpoint: &Path,
    pairs: &[ImagePair],
) -> Result<(ValidationReport, Vec<GrayImage>), CliError> {
    let model = load_checkpoint::<T>(checkpoint)?.model;
    let mut outputs = Vec::new();
    let report = validate_with(pairs, |p| {
        let sr = super_resolve(&model, &p.lr)?;
        outputs.push(sr.clone().with_max_value(p.hr.max_value()).quantized());
        Ok(sr)
    })?;
    Ok((report, outputs))
}

pub fn sr(a: &SrArgs, threads: usize) -> Result<(), CliError> {
    let info = read_checkpoint_info(&a.checkpoint)?;
    let mut kv = info.spec.to_key_values();
    kv.set("checkpoint", path_str(&a.checkpoint));
    kv.set("dtype", format!("{:?}", info.dtype).to_lowercase());
    kv.set("input", path_str(&a.input));
    kv.set("output", path_str(&a.output));
    kv.set("twice", a.twice);
    print_config("sr", &kv, threads);

    let jobs: Vec<(PathBuf, PathBuf)> = if a.input.is_dir() {
        fs::create_dir_all(&a.output).map_err(|e| CliError::io(&a.output, e))?;
        list_images(&a.input)?
            .into_iter()
            .map(|p| {
                let out = a.output.join(p.file_name().expect("listed file"));
                (p, out)
            })
            .collect()
    } else {
        vec![(a.input.clone(), a.output.clone())]
    };
    match info.dtype {
        DType::F32 => run_sr::<f32>(&a.checkpoint, &jobs, a.twice),
        DType::F64 => run_sr::<f64>(&a.checkpoint, &jobs, a.twice),
    }
}

fn run_sr<T: Real>(
    checkpoint: &Path,
    jobs: &[(PathBuf, PathBuf)],
    twice: bool,
) -> Result<(), CliError> {
    let model: ModelGraph<T> = load_checkpoint(checkpoint)?.model;
    for (input, output) in jobs {
        let lr = read_image(input)?;
        let mut sr = super_resolve(&model, &lr)?;
        if twice {
            sr = super_resolve(&model, &sr)?;
        }
        write_image(&sr, output)?;
        println!(
            "{} ({}x{}) -> {} ({}x{})",
            input.display(),
            lr.width(),
            lr.height(),
            output.display(),
            sr.width(),
            sr.height()
        );
    }
    Ok(())
}

fn size_checked<T>(reference: &Path, test: &Path, r: Result<T, ImageError>) -> Result<T, CliError> {
    r.map_err(|e| match e {
        ImageError::SizeMismatch { .. } => CliError::Usage(format!(
            "{} vs {}: {e}",
            reference.display(),
            test.display()
        )),
        e => e.into(),
    })
}

pub fn metrics(a: &MetricsArgs, threads: usize) -> Result<(), CliError> {
    if !a.method.is_empty() && a.method.len() != a.test.len() {
        return Err(CliError::Usage(format!(
            "{} --method labels for {} --test paths",
            a.method.len(),
            a.test.len()
        )));
    }
    let range = if a.fixed_range {
        PsnrRange::Fixed(1.0)
    } else {
        PsnrRange::Joint
    };
    let methods: Vec<String> = (0..a.test.len())
        .map(|i| {
            a.method.get(i).cloned().unwrap_or_else(|| {
                a.test[i]
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path_str(&a.test[i]))
            })
        })
        .collect();

    let mut kv = KeyValues::new();
    kv.set("ref", path_str(&a.reference));
    for (i, (t, m)) in a.test.iter().zip(&methods).enumerate() {
        kv.set(&format!("test.{i}"), format!("{} ({m})", t.display()));
    }
    kv.set("range", if a.fixed_range { "fixed 1.0" } else { "joint" });
    if let Some(o) = &a.out {
        kv.set("out", path_str(o));
    }
    if let Some(s) = &a.summary {
        kv.set("summary", path_str(s));
    }
    print_config("metrics", &kv, threads);

    let pairs: Vec<(PathBuf, PathBuf, &str)> = if a.reference.is_dir() {
        let refs = list_images(&a.reference)?;
        let mut pairs = Vec::new();
        for (t, m) in a.test.iter().zip(&methods) {
            if !t.is_dir() {
                return Err(CliError::Usage(format!(
                    "--ref is a directory, so --test {} must be one too",
                    t.display()
                )));
            }
            for r in &refs {
                pairs.push((
                    r.clone(),
                    t.join(r.file_name().expect("listed file")),
                    m.as_str(),
                ));
            }
        }
        pairs
    } else {
        a.test
            .iter()
            .zip(&methods)
            .map(|(t, m)| (a.reference.clone(), t.clone(), m.as_str()))
            .collect()
    };

    let mut scores = Vec::new();
    for (r, t, method) in &pairs {
        let ref_img = read_image(r)?;
        let test_img = read_image(t)?;
        let e = size_checked(r, t, mse(&test_img, &ref_img))?;
        let p = size_checked(r, t, psnr_with(&test_img, &ref_img, range))?;
        let flag = if p.is_infinite() {
            "  (identical: infinite)"
        } else {
            ""
        };
        println!("{}  {method}  mse {e:.6e}  psnr {p:.4}{flag}", t.display());
        scores.push(ImageScore {
            path: path_str(t),
            method: method.to_string(),
            mse: e,
            psnr: p,
        });
    }
    let summary = summary_json(&aggregate(&scores));
    let text = serde_json::to_string_pretty(&summary).expect("json");
    println!("{text}");
    if let Some(out) = &a.out {
        write_scores_csv(out, &scores).map_err(|e| CliError::io(out, e))?;
    }
    if let Some(path) = &a.summary {
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

pub fn diffmap(a: &DiffmapArgs, threads: usize) -> Result<(), CliError> {
    let mut kv = KeyValues::new();
    kv.set("ref", path_str(&a.reference));
    kv.set("test", path_str(&a.test));
    kv.set("out", path_str(&a.out));
    if let Some(r) = &a.raw {
        kv.set("raw", path_str(r));
    }
    print_config("diffmap", &kv, threads);

    let r = read_image(&a.reference)?;
    let t = read_image(&a.test)?;
    let map = size_checked(&a.reference, &a.test, difference_map(&r, &t))?;
    write_image(&map.display().with_max_value(255), &a.out)?;
    if let Some(raw) = &a.raw {
        write_image(&map.raw.clone().with_max_value(65535), raw)?;
    }
    println!("mean |difference| {:.6e}  max {:.6e}", map.mean(), map.max);
    Ok(())
}

pub fn hist(a: &HistArgs, threads: usize) -> Result<(), CliError> {
    if a.bins < 2 {
        return Err(CliError::Usage("--bins must be at least 2".into()));
    }
    let single_file = a.inputs.len() == 1
        && a.out
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let mut kv = KeyValues::new();
    for (i, p) in a.inputs.iter().enumerate() {
        kv.set(&format!("input.{i}"), path_str(p));
    }
    kv.set("bins", a.bins);
    kv.set("out", path_str(&a.out));
    print_config("hist", &kv, threads);

    if !single_file {
        fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    }
    for input in &a.inputs {
        let img = read_image(input)?;
        let counts = histogram(&img, a.bins)?;
        let out = if single_file {
            a.out.clone()
        } else {
            let stem = input.file_stem().unwrap_or_default().to_string_lossy();
            a.out.join(format!("{stem}.csv"))
        };
        write_histogram_csv(&out, &counts).map_err(|e| CliError::io(&out, e))?;
        println!(
            "{}: {} pixels, valley-to-peak {:.4} -> {}",
            input.display(),
            counts.iter().sum::<u64>(),
            valley_to_peak(&counts),
            out.display()
        );
    }
    Ok(())
}
