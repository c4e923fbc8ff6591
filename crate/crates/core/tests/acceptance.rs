//! Acceptance runner. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test -p rocksr --test acceptance -- 5 7`.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use common::{gradcheck, oracle, rng, texture};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rocksr::imaging::{
    add_noise, load_split, make_lr, prepare_dataset, resize, write_image, AugmentSpec,
    DownsampleMode, GrayImage, ImagePair, KernelKind, PrepareOptions, ResampleKernel,
};
use rocksr::metrics::{
    difference_map, edge_mask, histogram, intra_region_roughness, mse, psnr, psnr_with,
    valley_to_peak, PsnrRange,
};
use rocksr::models::{
    build, decode_checkpoint, encode_checkpoint, load_checkpoint, Checkpoint, Family, ModelGraph,
    ModelSpec, Op,
};
use rocksr::rng::substream;
use rocksr::tensor::Shape;
use rocksr::train::{
    bicubic_baseline, bicubic_upscale, checkpoint_name, lr_at, super_resolve, validate_with,
    TrainConfig, Trainer, LOSS_CSV,
};
use rocksr::{Real, Tensor};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

// 1. Gradients.

fn gradients() -> Outcome {
    let ops = gradcheck::all_ops();
    let worst_op = ops.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    for (name, err) in &ops {
        ensure(*err < gradcheck::OP_TOL, || {
            format!("{name}: relative error {err:e}")
        })?;
    }
    let mut models = Vec::new();
    for (i, family) in Family::ALL.into_iter().enumerate() {
        let err = gradcheck::end_to_end_fd(family, 24, 100 + i as u64);
        ensure(err < gradcheck::MODEL_TOL, || {
            format!("{family} end to end: relative error {err:e}")
        })?;
        models.push(format!("{family} {err:.1e}"));
    }
    Ok(format!(
        "{} op gradients, worst {worst_op:.1e}; 24 parameters per model: {}",
        ops.len(),
        models.join(", ")
    ))
}

// 2. Architectures.

fn architectures() -> Outcome {
    let frozen = [
        (ModelSpec::new(Family::SrResnet, 16), 1_529_921),
        (ModelSpec::new(Family::Edsr, 8), 924_417),
        (ModelSpec::new(Family::Edsr, 16), 1_515_265),
        (ModelSpec::new(Family::WdsrA, 8), 597_808),
        (ModelSpec::new(Family::WdsrB, 8), 651_984),
    ];
    for (spec, expected) in &frozen {
        ensure(spec.scale == 4 && spec.in_channels == 1, || {
            format!("{spec}: not grayscale x4")
        })?;
        let m: ModelGraph<f32> = build(spec, 0).map_err(e)?;
        let count = m.count_parameters();
        let enumerated = oracle::parameter_count(spec);
        ensure(count == enumerated && count == *expected, || {
            format!("{spec}: {count} parameters, enumeration {enumerated}, frozen {expected}")
        })?;
        let sigs = m.signatures();
        ensure(sigs == oracle::node_sequence(spec), || {
            format!("{spec}: node sequence differs from the enumeration")
        })?;
        let bn = m
            .nodes()
            .iter()
            .filter(|n| matches!(n.op, Op::BatchNorm { .. }))
            .count();
        if spec.family == Family::SrResnet {
            ensure(bn == 2 * spec.blocks + 1, || {
                format!("{spec}: {bn} batch norms")
            })?;
        } else {
            ensure(bn == 0, || format!("{spec}: {bn} batch norms"))?;
        }
    }
    let m: ModelGraph<f32> = build(&ModelSpec::new(Family::WdsrB, 8), 0).map_err(e)?;
    for b in 0..8 {
        let prefix = format!("body.{b}.");
        let widths: Vec<usize> = m
            .nodes()
            .iter()
            .filter(|n| n.name.starts_with(&prefix))
            .filter_map(|n| match n.op {
                Op::Conv { .. } => n.signature().split('/').nth(1)?.parse().ok(),
                _ => None,
            })
            .collect();
        ensure(widths == [192, 154, 32], || {
            format!("WDSR-B block {b} widths {widths:?}")
        })?;
    }
    Ok("5 architectures match the layer enumeration; WDSR-B widths 192/154/32".into())
}

// 3. Metrics.

fn image(v: &[f64]) -> GrayImage {
    GrayImage::new(v.len(), 1, v.to_vec()).unwrap()
}

fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut r = rng(seed);
    GrayImage::from_fn(w, h, |_, _| r.gen_range(0.0..1.0))
}

fn metrics() -> Outcome {
    let hand = [
        // Range 1, MSE 0.125: 10 log10(1 / 0.125).
        (image(&[0.0, 0.5]), image(&[0.0, 1.0]), 9.030899869919436),
        // Range 0.8, MSE 0.01: 10 log10(0.64 / 0.01).
        (image(&[0.1, 0.9]), image(&[0.2, 0.8]), 18.06179973983887),
        // Range 2 after an offset, MSE 0.25.
        (image(&[-1.0, 1.0]), image(&[-0.5, 0.5]), 12.041199826559248),
    ];
    for (a, b, expected) in &hand {
        let p = psnr(a, b).map_err(e)?;
        ensure((p - expected).abs() < 1e-6, || {
            format!("psnr {p} vs {expected}")
        })?;
    }
    ensure(
        mse(&image(&[0.0, 0.0]), &image(&[1.0, 0.0])).map_err(e)? == 0.5,
        || "mse of a unit difference over two pixels".into(),
    )?;
    ensure(
        psnr(&image(&[0.3, 0.6]), &image(&[0.3, 0.6])).map_err(e)? == f64::INFINITY,
        || "identical images must give infinite psnr".into(),
    )?;
    for trial in 0..100u64 {
        let mut r = rng(9000 + trial);
        let (w, h) = (r.gen_range(1..24), r.gen_range(1..24));
        let a = random_image(w, h, 2 * trial);
        let b = random_image(w, h, 2 * trial + 1);
        ensure(
            mse(&a, &b).map_err(e)? == mse(&b, &a).map_err(e)?
                && psnr(&a, &b).map_err(e)? == psnr(&b, &a).map_err(e)?,
            || format!("trial {trial}: asymmetric"),
        )?;
        let unit = Normal::new(0.0, 1.0).unwrap();
        let field: Vec<f64> = (0..24 * 24).map(|_| unit.sample(&mut r)).collect();
        let base = random_image(24, 24, 500 + trial);
        for range in [PsnrRange::Joint, PsnrRange::Fixed(1.0)] {
            let mut last = f64::INFINITY;
            for sigma in [0.01, 0.02, 0.05, 0.1, 0.2] {
                let mut noisy = base.clone();
                for (v, n) in noisy.pixels_mut().iter_mut().zip(&field) {
                    *v += sigma * n;
                }
                let p = psnr_with(&base, &noisy, range).map_err(e)?;
                ensure(p < last, || {
                    format!("trial {trial} {range:?}: psnr {p} at sigma {sigma} not below {last}")
                })?;
                last = p;
            }
        }
    }
    Ok("3 hand cases within 1e-6 dB; symmetry and noise monotonicity over 100 trials".into())
}

// 4. Resampling.

fn resampling() -> Outcome {
    let mut worst: f64 = 0.0;
    for kind in KernelKind::ALL {
        for factor in [0.25, 0.5, 0.75, 2.0, 4.0] {
            for antialias in [true, false] {
                let out = resize(
                    &GrayImage::filled(19, 13, 0.61),
                    factor,
                    ResampleKernel { kind, antialias },
                )
                .map_err(e)?;
                let err = out
                    .pixels()
                    .iter()
                    .map(|v| (v - 0.61).abs())
                    .fold(0.0, f64::max);
                ensure(err < 1e-10, || {
                    format!("{kind} x{factor}: constant moved by {err:e}")
                })?;
            }
        }
        let img = random_image(23, 17, 3);
        let out = resize(&img, 1.0, ResampleKernel::new(kind)).map_err(e)?;
        let err = out
            .pixels()
            .iter()
            .zip(img.pixels())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        ensure(err < 1e-12, || format!("{kind} x1: changed by {err:e}"))?;
    }
    for img in [random_image(64, 48, 4), texture::grain_slice(128, 5)] {
        let out = resize(&img, 0.25, ResampleKernel::new(KernelKind::Box)).map_err(e)?;
        let expected = oracle::block_average(img.pixels(), img.width(), img.height(), 4);
        ensure(out.len() == expected.len(), || "box x0.25 size".into())?;
        for (a, b) in out.pixels().iter().zip(&expected) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst < 1e-10, || {
        format!("box x0.25 differs from block means by {worst:e}")
    })?;
    Ok(format!(
        "5 kernels preserve constants and are identities at x1; box x0.25 within {worst:.1e} of block means"
    ))
}

// 5 and 7. Scaled-down training runs.

const SLICE: usize = 256;

struct Corpus {
    _dir: tempfile::TempDir,
    train: Vec<ImagePair>,
    valid: Vec<ImagePair>,
    test: Vec<ImagePair>,
}

fn corpus() -> &'static Result<Corpus, String> {
    static CORPUS: OnceLock<Result<Corpus, String>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let dir = tempfile::tempdir().map_err(e)?;
        let src = dir.path().join("slices");
        for (split, n, offset) in [("train", 10, 0u64), ("valid", 2, 100), ("test", 4, 200)] {
            std::fs::create_dir_all(src.join(split)).map_err(e)?;
            for i in 0..n {
                let slice = texture::grain_slice(SLICE, offset + i).with_max_value(255);
                write_image(&slice, &src.join(split).join(format!("slice{i:02}.png")))
                    .map_err(e)?;
            }
        }
        let out = dir.path().join("data");
        let opts = PrepareOptions {
            scale: 4,
            mode: DownsampleMode::Unknown,
            augment: None,
            seed: 21,
            split: "train".into(),
        };
        prepare_dataset(&src, &out, &opts).map_err(e)?;
        let load = |split| load_split(&out, split, DownsampleMode::Unknown, 4).map_err(e);
        Ok(Corpus {
            train: load("train")?,
            valid: load("valid")?,
            test: load("test")?,
            _dir: dir,
        })
    })
}

fn scaled_config(augment: bool) -> TrainConfig {
    let mut c = TrainConfig::new(ModelSpec::new(Family::WdsrB, 2));
    c.iterations_per_epoch = 1000;
    c.epochs = 3;
    c.batch = 8;
    c.lr_crop = 48;
    c.seed = 5;
    c.augment = augment;
    c.augment_spec = AugmentSpec::default();
    c
}

struct Trained {
    model: ModelGraph<f32>,
    best_epoch: usize,
    best_valid: f64,
}

fn train_scaled(augment: bool) -> Result<Trained, String> {
    let data = corpus().as_ref().map_err(Clone::clone)?;
    let dir = tempfile::tempdir().map_err(e)?;
    let mut t = Trainer::<f32>::new(scaled_config(augment)).map_err(e)?;
    let outcome = t.fit(&data.train, &data.valid, dir.path()).map_err(e)?;
    let best: Checkpoint<f32> = load_checkpoint(&outcome.best_checkpoint).map_err(e)?;
    Ok(Trained {
        model: best.model,
        best_epoch: outcome.best_epoch,
        best_valid: outcome.best_psnr,
    })
}

fn plain_model() -> &'static Result<Trained, String> {
    static MODEL: OnceLock<Result<Trained, String>> = OnceLock::new();
    MODEL.get_or_init(|| train_scaled(false))
}

fn augmented_model() -> &'static Result<Trained, String> {
    static MODEL: OnceLock<Result<Trained, String>> = OnceLock::new();
    MODEL.get_or_init(|| train_scaled(true))
}

fn sr_gain() -> Outcome {
    let data = corpus().as_ref().map_err(Clone::clone)?;
    let trained = plain_model().as_ref().map_err(Clone::clone)?;
    let sr = validate_with(&data.test, |p| super_resolve(&trained.model, &p.lr)).map_err(e)?;
    let bicubic = bicubic_baseline(&data.test).map_err(e)?;
    let gain = sr.mean - bicubic.mean;
    let detail = format!(
        "held-out SR {:.3} dB vs bicubic {:.3} dB (gain {gain:.3} dB; best epoch {} at {:.3} dB on validation; {} training slices)",
        sr.mean,
        bicubic.mean,
        trained.best_epoch,
        trained.best_valid,
        data.train.len()
    );
    ensure(gain >= 1.0, || detail.clone())?;
    Ok(detail)
}

fn denoising() -> Outcome {
    let data = corpus().as_ref().map_err(Clone::clone)?;
    let plain = plain_model().as_ref().map_err(Clone::clone)?;
    let augmented = augmented_model().as_ref().map_err(Clone::clone)?;
    let mut noise = substream(31, "acceptance-noise");
    let n = data.test.len() as f64;
    let (mut rough_plain, mut rough_aug, mut vtp_input, mut vtp_aug) = (0.0, 0.0, 0.0, 0.0);
    for pair in &data.test {
        let noisy = add_noise(&pair.lr, 0.005, &mut noise).clamp();
        let edges = edge_mask(&pair.hr, 0.25, 2);
        let sr_plain = super_resolve(&plain.model, &noisy).map_err(e)?;
        let sr_aug = super_resolve(&augmented.model, &noisy).map_err(e)?;
        rough_plain += intra_region_roughness(&sr_plain, &edges) / n;
        rough_aug += intra_region_roughness(&sr_aug, &edges) / n;
        vtp_input += valley_to_peak(&histogram(&noisy, 256).map_err(e)?) / n;
        vtp_aug += valley_to_peak(&histogram(&sr_aug, 256).map_err(e)?) / n;
    }
    let detail = format!(
        "intra-region roughness augmented {rough_aug:.4} vs unaugmented {rough_plain:.4}; valley-to-peak augmented SR {vtp_aug:.3} vs noisy input {vtp_input:.3}"
    );
    ensure(rough_aug < rough_plain && vtp_aug < vtp_input, || {
        detail.clone()
    })?;
    Ok(detail)
}

// 6. Overfitting one crop.

fn overfit() -> Outcome {
    let mut r = substream(17, "acceptance-overfit");
    let hr = texture::grain_slice(192, 77)
        .with_max_value(255)
        .quantized();
    let pair = make_lr(&hr, "crop", 4, DownsampleMode::Bicubic, &mut r).map_err(e)?;
    let lr = pair.lr.quantized();
    let mut c = TrainConfig::new(ModelSpec::new(Family::WdsrB, 1));
    c.seed = 3;
    let rate = c.lr_at(0);
    let mut t = Trainer::<f32>::new(c).map_err(e)?;
    let (x, y): (Tensor<f32>, Tensor<f32>) = (lr.to_tensor(), hr.to_tensor());
    let first = t.loss(&x, &y).map_err(e)?;
    for _ in 0..2000 {
        t.train_step(&x, &y, rate).map_err(e)?;
    }
    let last = t.loss(&x, &y).map_err(e)?;
    let sr = super_resolve(&t.model, &lr).map_err(e)?.quantized();
    let bicubic = bicubic_upscale(&lr, hr.width(), hr.height())
        .map_err(e)?
        .quantized();
    let (p_sr, p_bic) = (psnr(&sr, &hr).map_err(e)?, psnr(&bicubic, &hr).map_err(e)?);
    let edges = edge_mask(&hr, 0.25, 1);
    let edge_sr = difference_map(&sr, &hr).map_err(e)?.masked_mean(&edges);
    let edge_bic = difference_map(&bicubic, &hr)
        .map_err(e)?
        .masked_mean(&edges);
    let detail = format!(
        "MSE {first:.3e} -> {last:.3e} ({:.1}x); SR {p_sr:.3} dB vs bicubic {p_bic:.3} dB; edge error SR {edge_sr:.4} vs bicubic {edge_bic:.4}",
        first / last
    );
    ensure(
        last * 10.0 <= first && p_sr - p_bic >= 1.0 && edge_bic > edge_sr,
        || detail.clone(),
    )?;
    Ok(detail)
}

// 8. Determinism and persistence.

fn small_pairs(n: usize, seed: u64) -> Vec<ImagePair> {
    let mut r = substream(seed, "acceptance-pairs");
    (0..n)
        .map(|i| {
            let hr = texture::grain_slice(32, seed * 10 + i as u64).quantized();
            let p = make_lr(&hr, "s", 2, DownsampleMode::Unknown, &mut r).unwrap();
            ImagePair {
                name: format!("s{i}"),
                lr: p.lr.quantized(),
                hr: p.hr,
            }
        })
        .collect()
}

fn small_config(family: Family) -> TrainConfig {
    let mut c = TrainConfig::new(ModelSpec::new(family, 2).with_scale(2).with_filters(8));
    c.iterations_per_epoch = 5;
    c.batch = 2;
    c.lr_crop = 8;
    c.epochs = 3;
    c.seed = 8;
    c.augment = true;
    c
}

fn dir_files(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(e)? {
            let path = entry.map_err(e)?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).map_err(e)?);
            }
        }
    }
    Ok(out)
}

/// Parameters and batch-norm statistics; metadata carries wall times.
fn same_weights(a: &ModelGraph<f32>, b: &ModelGraph<f32>) -> bool {
    a.params() == b.params() && a.norms() == b.norms()
}

fn round_trip<T: Real>(family: Family) -> Result<(), String> {
    let mut m: ModelGraph<T> = build(&ModelSpec::new(family, 2).with_filters(8), 4).map_err(e)?;
    let mut r = rng(6);
    let warm = Tensor::from_fn(Shape::new(2, 1, 9, 9), |_, _, _, _| {
        T::lit(r.gen_range(0.0..1.0))
    });
    m.forward_train(&warm).map_err(e)?;
    let x = Tensor::from_fn(Shape::new(1, 1, 11, 7), |_, _, _, _| {
        T::lit(r.gen_range(0.0..1.0))
    });
    let bytes = encode_checkpoint(&m, None);
    let back: Checkpoint<T> = decode_checkpoint(&bytes, Some(m.spec())).map_err(e)?;
    let (a, b) = (
        m.forward(&x).map_err(e)?,
        back.model.forward(&x).map_err(e)?,
    );
    let same = a
        .data()
        .iter()
        .zip(b.data())
        .all(|(p, q)| p.f64().to_bits() == q.f64().to_bits());
    ensure(same && back.model == m, || {
        format!(
            "{family} {:?}: round trip changed the forward output",
            T::DTYPE
        )
    })
}

fn determinism() -> Outcome {
    rocksr::exec::set_threads(1);
    let dir = tempfile::tempdir().map_err(e)?;
    let src = dir.path().join("slices");
    std::fs::create_dir_all(&src).map_err(e)?;
    for i in 0..3 {
        write_image(
            &texture::grain_slice(64, 40 + i),
            &src.join(format!("s{i}.png")),
        )
        .map_err(e)?;
    }
    let opts = PrepareOptions {
        scale: 4,
        mode: DownsampleMode::Unknown,
        augment: Some(AugmentSpec::default()),
        seed: 2,
        split: "train".into(),
    };
    let (pa, pb) = (dir.path().join("a"), dir.path().join("b"));
    prepare_dataset(&src, &pa, &opts).map_err(e)?;
    prepare_dataset(&src, &pb, &opts).map_err(e)?;
    let files = dir_files(&pa)?;
    ensure(files == dir_files(&pb)?, || {
        "prepared datasets differ".into()
    })?;

    let (train, valid) = (small_pairs(3, 1), small_pairs(1, 2));
    let run = |out: &Path| -> Result<(Trainer<f32>, GrayImage), String> {
        let mut t = Trainer::<f32>::new(small_config(Family::WdsrB)).map_err(e)?;
        t.fit(&train, &valid, out).map_err(e)?;
        let sr = super_resolve(&t.model, &valid[0].lr).map_err(e)?;
        Ok((t, sr))
    };
    let (ra, rb) = (dir.path().join("ra"), dir.path().join("rb"));
    let (a, sr_a) = run(&ra)?;
    let (b, sr_b) = run(&rb)?;
    ensure(a.log.without_timings() == b.log.without_timings(), || {
        "fixed-seed training logs differ".into()
    })?;
    ensure(
        same_weights(&a.model, &b.model) && a.optimizer == b.optimizer,
        || "fixed-seed training runs end with different weights".into(),
    )?;
    ensure(sr_a.pixels() == sr_b.pixels(), || {
        "fixed-seed models super-resolve differently".into()
    })?;
    let read = |p: &Path| std::fs::read(p.join(LOSS_CSV)).map_err(e);
    ensure(read(&ra)? == read(&rb)?, || "loss logs differ".into())?;
    for epoch in 0..3 {
        let load = |d: &Path| load_checkpoint::<f32>(&d.join(checkpoint_name(epoch))).map_err(e);
        let (ca, cb) = (load(&ra)?, load(&rb)?);
        ensure(
            same_weights(&ca.model, &cb.model) && ca.optimizer == cb.optimizer,
            || format!("epoch {epoch} checkpoints differ"),
        )?;
    }

    for family in Family::ALL {
        round_trip::<f32>(family)?;
        round_trip::<f64>(family)?;
    }

    for family in [Family::SrResnet, Family::Edsr, Family::WdsrB] {
        let config = small_config(family);
        let whole = dir.path().join(format!("whole-{family}"));
        let mut full = Trainer::<f32>::new(config.clone()).map_err(e)?;
        full.fit(&train, &valid, &whole).map_err(e)?;
        let part = dir.path().join(format!("part-{family}"));
        let mut first = config.clone();
        first.epochs = 1;
        Trainer::<f32>::new(first)
            .map_err(e)?
            .fit(&train, &valid, &part)
            .map_err(e)?;
        let mut resumed =
            Trainer::<f32>::resume_from(config, &part.join(checkpoint_name(0))).map_err(e)?;
        resumed.fit(&train, &valid, &part).map_err(e)?;
        let checks = [
            ("weights", same_weights(&full.model, &resumed.model)),
            ("optimizer state", full.optimizer == resumed.optimizer),
            (
                "validation log",
                full.log.without_timings().epochs == resumed.log.without_timings().epochs,
            ),
            ("loss log", read(&whole)? == read(&part)?),
        ];
        for (what, same) in checks {
            ensure(same, || {
                format!("{family}: resumed run has a different {what} than the uninterrupted one")
            })?;
        }
    }
    Ok(format!(
        "prepare ({} files) and 3-epoch training repeat bit for bit; checkpoints reproduce forward passes exactly in f32 and f64; resumed runs match",
        files.len()
    ))
}

// 9. Learning-rate schedule.

fn schedule() -> Outcome {
    let mut worst: f64 = 0.0;
    for (lr_init, step) in [
        (1e-3, 100.0),
        (1e-4, 100.0),
        (1e-3, 37.5),
        (2.5e-4, 250.0),
        (1e-3, 7.0),
    ] {
        let mut c = TrainConfig::new(ModelSpec::new(Family::WdsrB, 8));
        c.lr_init = lr_init;
        c.step = step;
        for epoch in [0.0, step, 2.0 * step, 300.0] {
            let direct = lr_init * (-(epoch / step) * std::f64::consts::LN_2).exp();
            let mut got = vec![lr_at(lr_init, step, epoch)];
            if epoch.fract() == 0.0 {
                got.push(c.lr_at(epoch as usize));
            }
            for got in got {
                let rel = (got - direct).abs() / direct;
                worst = worst.max(rel);
                ensure(rel <= 1e-12, || {
                    format!("lr_init {lr_init} step {step} epoch {epoch}: {got} vs {direct}")
                })?;
            }
        }
        let halvings = [(step, 0.5), (2.0 * step, 0.25)];
        for (epoch, factor) in halvings {
            let got = lr_at(lr_init, step, epoch);
            ensure(
                (got - lr_init * factor).abs() <= 1e-12 * lr_init * factor,
                || format!("step {step}: {got} at epoch {epoch}"),
            )?;
        }
    }
    Ok(format!(
        "5 schedules at epochs 0, step, 2 step, 300; worst relative error {worst:.1e}"
    ))
}

const CRITERIA: [(usize, &str, fn() -> Outcome); 9] = [
    (1, "gradient correctness", gradients),
    (2, "architecture audits", architectures),
    (3, "metric fidelity", metrics),
    (4, "resampling fidelity", resampling),
    (5, "directional SR gain", sr_gain),
    (6, "overfit sanity", overfit),
    (7, "augmentation denoising", denoising),
    (8, "determinism and persistence", determinism),
    (9, "learning-rate schedule", schedule),
];

fn main() {
    rocksr::exec::set_threads(1);
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (n, name, check) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
