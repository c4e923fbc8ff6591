//! Central finite-difference checks of every differentiable op and of
//! whole models, reporting the worst relative error of each gradient.
#![allow(dead_code)]

use rand::Rng;
use rocksr::models::{build, Family, ModelGraph, ModelSpec};
use rocksr::tensor::*;
use rocksr::{Shape, Tensor};

use super::{central_diff, dot, max_fd_error, random_tensor, rel_err, rng};

pub const H: f64 = 1e-5;
/// Bound on the relative error of single-op gradients.
pub const OP_TOL: f64 = 1e-4;
/// Bound on the relative error of whole-model spot checks.
pub const MODEL_TOL: f64 = 1e-3;

pub type Report = Vec<(String, f64)>;

const SHAPES: [(Shape, usize, usize); 3] = [
    (Shape::new(1, 1, 5, 5), 2, 3),
    (Shape::new(2, 3, 6, 4), 4, 3),
    (Shape::new(3, 2, 4, 7), 3, 5),
];

pub fn conv(seed: u64) -> Report {
    let mut r = rng(seed);
    let mut report = Vec::new();
    for (shape, filters, k) in SHAPES {
        let x = random_tensor(shape, &mut r);
        let w = random_tensor(Shape::new(filters, shape.channels, k, k), &mut r);
        let bias: Vec<f64> = (0..filters).map(|_| r.gen_range(-1.0..1.0)).collect();
        let pad = Padding::same(k, k);
        let out = conv2d(&x, &w, &bias, pad).unwrap();
        let proj = random_tensor(out.shape(), &mut r);
        let grads = conv2d_backward_with(&proj, &x, &w, pad).unwrap();

        let err = max_fd_error(x.data(), grads.input.data(), H, |xd| {
            let xt = Tensor::from_vec(shape, xd.to_vec()).unwrap();
            dot(conv2d(&xt, &w, &bias, pad).unwrap().data(), proj.data())
        });
        report.push((format!("conv input {shape}"), err));
        let err = max_fd_error(w.data(), grads.weight.data(), H, |wd| {
            let wt = Tensor::from_vec(w.shape(), wd.to_vec()).unwrap();
            dot(conv2d(&x, &wt, &bias, pad).unwrap().data(), proj.data())
        });
        report.push((format!("conv weight {shape}"), err));
        let err = max_fd_error(&bias, &grads.bias, H, |bd| {
            dot(conv2d(&x, &w, bd, pad).unwrap().data(), proj.data())
        });
        report.push((format!("conv bias {shape}"), err));
    }
    report
}

pub fn activations(seed: u64) -> Report {
    let mut r = rng(seed);
    let mut report = Vec::new();
    for (shape, _, _) in SHAPES {
        let x = random_tensor(shape, &mut r);
        let proj = random_tensor(shape, &mut r);
        let alpha: Vec<f64> = (0..shape.channels)
            .map(|_| r.gen_range(0.05..0.5))
            .collect();
        for spec in [
            ActivationSpec::relu(),
            ActivationSpec::leaky(0.2),
            ActivationSpec::prelu(alpha.clone()),
        ] {
            let (dx, da) = activation_backward(&proj, &x, &spec).unwrap();
            let err = max_fd_error(x.data(), dx.data(), H, |xd| {
                let xt = Tensor::from_vec(shape, xd.to_vec()).unwrap();
                dot(activation_forward(&xt, &spec).unwrap().data(), proj.data())
            });
            report.push((format!("{:?} input {shape}", spec.kind), err));
            if spec.kind == ActivationKind::Prelu {
                let err = max_fd_error(&alpha, &da.unwrap(), H, |ad| {
                    dot(
                        activation_forward(&x, &ActivationSpec::prelu(ad.to_vec()))
                            .unwrap()
                            .data(),
                        proj.data(),
                    )
                });
                report.push((format!("prelu alpha {shape}"), err));
            }
        }
    }
    report
}

pub fn batch_norm_train(seed: u64) -> Report {
    let mut r = rng(seed);
    let mut report = Vec::new();
    let shapes = [
        Shape::new(2, 2, 4, 4),
        Shape::new(3, 1, 2, 5),
        Shape::new(1, 3, 3, 3),
    ];
    for shape in shapes {
        let x = random_tensor(shape, &mut r);
        let proj = random_tensor(shape, &mut r);
        let gamma: Vec<f64> = (0..shape.channels).map(|_| r.gen_range(0.5..1.5)).collect();
        let beta: Vec<f64> = (0..shape.channels)
            .map(|_| r.gen_range(-0.5..0.5))
            .collect();
        let run = |xt: &Tensor<f64>, g: &[f64], b: &[f64]| {
            let mut state = BatchNormState::default();
            let (out, cache) = batch_norm(xt, g, b, &mut state, BatchNormMode::Train).unwrap();
            (dot(out.data(), proj.data()), cache.unwrap())
        };
        let (_, cache) = run(&x, &gamma, &beta);
        let (dx, dgamma, dbeta) = batch_norm_backward(&proj, &cache, &gamma).unwrap();
        let err = max_fd_error(x.data(), dx.data(), H, |xd| {
            run(
                &Tensor::from_vec(shape, xd.to_vec()).unwrap(),
                &gamma,
                &beta,
            )
            .0
        });
        report.push((format!("batch norm input {shape}"), err));
        let err = max_fd_error(&gamma, &dgamma, H, |g| run(&x, g, &beta).0);
        report.push((format!("batch norm gamma {shape}"), err));
        let err = max_fd_error(&beta, &dbeta, H, |b| run(&x, &gamma, b).0);
        report.push((format!("batch norm beta {shape}"), err));
    }
    report
}

pub fn weight_norm(seed: u64) -> Report {
    let mut r = rng(seed);
    let mut report = Vec::new();
    for shape in [
        Shape::new(2, 3, 3, 3),
        Shape::new(4, 1, 1, 1),
        Shape::new(3, 2, 5, 5),
    ] {
        let v = random_tensor(shape, &mut r);
        let g: Vec<f64> = (0..shape.batch).map(|_| r.gen_range(0.5..2.0)).collect();
        let proj = random_tensor(shape, &mut r);
        let (dg, dv) = weight_norm_backward(&g, &v, &proj).unwrap();
        let err = max_fd_error(&g, &dg, H, |gd| {
            dot(weight_norm_materialize(gd, &v).unwrap().data(), proj.data())
        });
        report.push((format!("weight norm g {shape}"), err));
        let err = max_fd_error(v.data(), dv.data(), H, |vd| {
            let vt = Tensor::from_vec(shape, vd.to_vec()).unwrap();
            dot(
                weight_norm_materialize(&g, &vt).unwrap().data(),
                proj.data(),
            )
        });
        report.push((format!("weight norm v {shape}"), err));
    }
    report
}

pub fn depth_to_space_op(seed: u64) -> Report {
    let mut r = rng(seed);
    let mut report = Vec::new();
    for (shape, n) in [
        (Shape::new(1, 4, 2, 3), 2),
        (Shape::new(2, 18, 2, 2), 3),
        (Shape::new(1, 16, 3, 1), 4),
    ] {
        let x = random_tensor(shape, &mut r);
        let out = depth_to_space(&x, n).unwrap();
        let proj = random_tensor(out.shape(), &mut r);
        let dx = space_to_depth(&proj, n).unwrap();
        let err = max_fd_error(x.data(), dx.data(), H, |xd| {
            dot(
                depth_to_space(&Tensor::from_vec(shape, xd.to_vec()).unwrap(), n)
                    .unwrap()
                    .data(),
                proj.data(),
            )
        });
        report.push((format!("depth to space x{n} {shape}"), err));
    }
    report
}

/// Every op check with the seeds the unit tests use.
pub fn all_ops() -> Report {
    let mut r = conv(2);
    r.extend(activations(3));
    r.extend(batch_norm_train(4));
    r.extend(weight_norm(6));
    r.extend(depth_to_space_op(8));
    r
}

fn mse_loss(out: &Tensor<f64>, y: &Tensor<f64>) -> f64 {
    out.data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / out.len() as f64
}

fn loss_and_grad(m: &mut ModelGraph<f64>, x: &Tensor<f64>, y: &Tensor<f64>) -> f64 {
    let tape = m.forward_train(x).unwrap();
    let out = tape.output();
    let n = out.len() as f64;
    let grad = Tensor::from_vec(
        out.shape(),
        out.data()
            .iter()
            .zip(y.data())
            .map(|(a, b)| 2.0 * (a - b) / n)
            .collect(),
    )
    .unwrap();
    let loss = mse_loss(out, y);
    m.zero_grads();
    m.backward(&tape, &grad).unwrap();
    loss
}

fn loss_only(m: &mut ModelGraph<f64>, x: &Tensor<f64>, y: &Tensor<f64>) -> f64 {
    let tape = m.forward_train(x).unwrap();
    mse_loss(tape.output(), y)
}

/// Worst relative error of the MSE-loss gradient over `samples` randomly
/// chosen parameter scalars of a tiny model (2 blocks, 4 filters, scale 2,
/// a batch of two 8x8 inputs).
pub fn end_to_end_fd(family: Family, samples: usize, seed: u64) -> f64 {
    let s = ModelSpec::new(family, 2).with_filters(4).with_scale(2);
    let mut m: ModelGraph<f64> = build(&s, seed).unwrap();
    let mut r = rng(seed);
    // Shift biases off their initial values so every path is exercised.
    for p in m.params_mut() {
        if p.name.ends_with(".bias") || p.name.ends_with(".beta") {
            p.value
                .data_mut()
                .iter_mut()
                .for_each(|v| *v = r.gen_range(-0.1..0.1));
        }
    }
    let x = random_tensor(Shape::new(2, 1, 8, 8), &mut r).map(|v| 0.5 + 0.5 * v);
    let y = random_tensor(Shape::new(2, 1, 16, 16), &mut r).map(|v| 0.5 + 0.5 * v);
    loss_and_grad(&mut m, &x, &y);
    let analytic: Vec<Vec<f64>> = m
        .params()
        .iter()
        .map(|p| p.value.grad().unwrap().to_vec())
        .collect();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let pi = r.gen_range(0..m.params().len());
        let k = r.gen_range(0..m.params()[pi].len());
        let mut values = m.params()[pi].value.data().to_vec();
        let mut probe = m.clone();
        let numeric = central_diff(&mut values, k, H, |v| {
            probe.params_mut()[pi].value.data_mut().copy_from_slice(v);
            loss_only(&mut probe, &x, &y)
        });
        worst = worst.max(rel_err(analytic[pi][k], numeric));
    }
    worst
}
