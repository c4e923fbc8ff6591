//! Independent reference implementations.
#![allow(dead_code)]

use rocksr::{Family, ModelSpec, Tensor};

/// Direct six-loop cross-correlation with zero padding.
pub fn conv_loops(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    bias: &[f64],
    pad_y: usize,
    pad_x: usize,
) -> Vec<f64> {
    let [b, c, h, wd] = x.shape().dims();
    let [f, _, ky, kx] = w.shape().dims();
    let oh = h + 2 * pad_y + 1 - ky;
    let ow = wd + 2 * pad_x + 1 - kx;
    let mut out = Vec::with_capacity(b * f * oh * ow);
    for bi in 0..b {
        for fi in 0..f {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[fi];
                    for ci in 0..c {
                        for dy in 0..ky {
                            for dx in 0..kx {
                                let iy = (oy + dy) as isize - pad_y as isize;
                                let ix = (ox + dx) as isize - pad_x as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                    acc += x.at(bi, ci, iy as usize, ix as usize)
                                        * w.at(fi, ci, dy, dx);
                                }
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}

fn conv(k: usize, cin: usize, cout: usize) -> usize {
    k * k * cin * cout + cout
}

fn wn_conv(k: usize, cin: usize, cout: usize) -> usize {
    conv(k, cin, cout) + cout
}

/// Learnable scalar count from the layer shapes of each architecture.
pub fn parameter_count(spec: &ModelSpec) -> usize {
    let f = spec.base_filters;
    let (cin, cout, n) = (spec.in_channels, spec.out_channels, spec.scale);
    let stages = (n as f64).log2().round() as usize;
    match spec.family {
        Family::SrResnet => {
            let head = conv(9, cin, f) + f;
            let block = 2 * conv(3, f, f) + 2 * (2 * f) + f;
            let post = conv(3, f, f) + 2 * f;
            let up = stages * (conv(3, f, 4 * f) + f);
            head + spec.blocks * block + post + up + conv(spec.final_kernel, f, cout)
        }
        Family::Edsr => {
            let block = 2 * conv(3, f, f);
            conv(3, cin, f)
                + spec.blocks * block
                + conv(3, f, f)
                + stages * conv(3, f, 4 * f)
                + conv(3, f, cout)
        }
        Family::WdsrA | Family::WdsrB => {
            let block = if spec.family == Family::WdsrA {
                wn_conv(3, f, 4 * f) + wn_conv(3, 4 * f, f)
            } else {
                let wide = 6 * f;
                let linear = (wide * 4 + 2) / 5;
                wn_conv(1, f, wide) + wn_conv(1, wide, linear) + wn_conv(3, linear, f)
            };
            wn_conv(3, cin, f)
                + spec.blocks * block
                + wn_conv(3, f, cout * n * n)
                + wn_conv(5, cin, cout * n * n)
        }
    }
}

/// Expected node signatures, in execution order, for each architecture.
pub fn node_sequence(spec: &ModelSpec) -> Vec<String> {
    let f = spec.base_filters;
    let (cout, n) = (spec.out_channels, spec.scale);
    let stages = (n as f64).log2().round() as usize;
    let mut s: Vec<String> = vec!["input".into()];
    let mut push = |items: &[String]| s.extend(items.iter().cloned());
    let c = |k: usize, out: usize| format!("conv{k}/{out}");
    let t = |x: &str| x.to_string();
    match spec.family {
        Family::SrResnet => {
            push(&[c(9, f), t("act")]);
            for _ in 0..spec.blocks {
                push(&[c(3, f), t("bn"), t("act"), c(3, f), t("bn"), t("add")]);
            }
            push(&[c(3, f), t("bn"), t("add")]);
            for _ in 0..stages {
                push(&[c(3, 4 * f), t("d2s2"), t("act")]);
            }
            push(&[c(spec.final_kernel, cout)]);
        }
        Family::Edsr => {
            push(&[c(3, f)]);
            for _ in 0..spec.blocks {
                push(&[c(3, f), t("act"), c(3, f), t("add")]);
            }
            push(&[c(3, f), t("add")]);
            for _ in 0..stages {
                push(&[c(3, 4 * f), t("d2s2")]);
            }
            push(&[c(3, cout)]);
        }
        Family::WdsrA | Family::WdsrB => {
            push(&[c(3, f)]);
            for _ in 0..spec.blocks {
                if spec.family == Family::WdsrA {
                    push(&[c(3, 4 * f), t("act"), c(3, f), t("add")]);
                } else {
                    let wide = 6 * f;
                    push(&[
                        c(1, wide),
                        t("act"),
                        c(1, (wide * 4 + 2) / 5),
                        c(3, f),
                        t("add"),
                    ]);
                }
            }
            let up = format!("d2s{n}");
            push(&[
                c(3, cout * n * n),
                up.clone(),
                c(5, cout * n * n),
                up,
                t("add"),
            ]);
        }
    }
    s
}

/// Mean of each `k`x`k` block.
pub fn block_average(pixels: &[f64], width: usize, height: usize, k: usize) -> Vec<f64> {
    let (ow, oh) = (width / k, height / k);
    let mut out = vec![0.0; ow * oh];
    for oy in 0..oh {
        for ox in 0..ow {
            let mut s = 0.0;
            for y in 0..k {
                for x in 0..k {
                    s += pixels[(oy * k + y) * width + ox * k + x];
                }
            }
            out[oy * ow + ox] = s / (k * k) as f64;
        }
    }
    out
}

/// Two-pass mean squared error.
pub fn mse_loops(a: &[f64], b: &[f64]) -> f64 {
    let mut diffs = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        diffs.push(a[i] - b[i]);
    }
    let mut total = 0.0;
    for d in &diffs {
        total += d * d;
    }
    total / a.len() as f64
}
