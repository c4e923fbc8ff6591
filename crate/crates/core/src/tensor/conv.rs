//! Stride-1 2-D cross-correlation with explicit zero padding.
//!
//! Forward and backward passes lower each batch image onto GEMM. Kernels
//! larger than 1x1 go through an im2col buffer built a few output rows at a
//! time so the scratch space stays bounded on full-size slices.

use super::{Axis, Shape, Tensor, TensorError};
use crate::exec;
use crate::real::{gemm, MatMut, MatRef, Real};

/// Scratch budget (elements) for one im2col chunk.
const COL_CHUNK: usize = 1 << 18;

/// Zero padding per side, in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding {
    /// Padding that preserves the spatial size for odd kernels.
    pub fn same(ky: usize, kx: usize) -> Self {
        Padding {
            top: ky / 2,
            bottom: ky / 2,
            left: kx / 2,
            right: kx / 2,
        }
    }

    pub fn uniform(p: usize) -> Self {
        Padding {
            top: p,
            bottom: p,
            left: p,
            right: p,
        }
    }
}

/// Filters `(n_f, in_channels, k_y, k_x)`, one bias per filter, and padding.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T> {
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
    pub padding: Padding,
}

impl<T: Real> ConvParams<T> {
    pub fn new(weight: Tensor<T>, bias: Vec<T>, padding: Padding) -> Self {
        ConvParams {
            weight,
            bias,
            padding,
        }
    }

    /// Size-preserving convolution.
    pub fn same(weight: Tensor<T>, bias: Vec<T>) -> Self {
        let s = weight.shape();
        ConvParams {
            weight,
            bias,
            padding: Padding::same(s.height, s.width),
        }
    }
}

/// Gradients of a convolution with respect to its three inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    cin: usize,
    h: usize,
    w: usize,
    nf: usize,
    ky: usize,
    kx: usize,
    pad: Padding,
    ho: usize,
    wo: usize,
}

impl Geometry {
    fn new(
        input: Shape,
        weight: Shape,
        bias_len: usize,
        pad: Padding,
    ) -> Result<Self, TensorError> {
        let op = "conv2d";
        if weight.channels != input.channels {
            return Err(TensorError::Dimension {
                op,
                axis: Axis::Channels,
                expected: weight.channels,
                actual: input.channels,
            });
        }
        if bias_len != weight.batch {
            return Err(TensorError::Dimension {
                op: "conv2d bias",
                axis: Axis::Channels,
                expected: weight.batch,
                actual: bias_len,
            });
        }
        let (ky, kx) = (weight.height, weight.width);
        if ky % 2 == 0 || kx % 2 == 0 {
            return Err(TensorError::EvenKernel { op, ky, kx });
        }
        let ph = input.height + pad.top + pad.bottom;
        let pw = input.width + pad.left + pad.right;
        if ph < ky || pw < kx {
            return Err(TensorError::EmptyOutput { op });
        }
        Ok(Geometry {
            cin: input.channels,
            h: input.height,
            w: input.width,
            nf: weight.batch,
            ky,
            kx,
            pad,
            ho: ph - ky + 1,
            wo: pw - kx + 1,
        })
    }

    fn pointwise(&self) -> bool {
        self.ky == 1 && self.kx == 1 && self.pad == Padding::default()
    }

    fn patch(&self) -> usize {
        self.cin * self.ky * self.kx
    }

    fn out_plane(&self) -> usize {
        self.ho * self.wo
    }

    fn chunk_rows(&self) -> usize {
        (COL_CHUNK / (self.patch() * self.wo).max(1)).clamp(1, self.ho)
    }

    fn output_shape(&self, batch: usize) -> Shape {
        Shape::new(batch, self.nf, self.ho, self.wo)
    }

    /// Output-column range `[lo, hi)` for which kernel column `dx` reads
    /// inside the input row.
    fn valid_cols(&self, dx: usize) -> (usize, usize) {
        let lo = self.pad.left.saturating_sub(dx).min(self.wo);
        let hi = (self.w + self.pad.left)
            .saturating_sub(dx)
            .min(self.wo)
            .max(lo);
        (lo, hi)
    }

    /// Fills `col` (`patch x nrows*wo`) for output rows `oy0..oy0+nrows`.
    fn im2col<T: Real>(&self, x: &[T], oy0: usize, nrows: usize, col: &mut [T]) {
        let len = nrows * self.wo;
        let plane = self.h * self.w;
        for ci in 0..self.cin {
            let src_plane = &x[ci * plane..(ci + 1) * plane];
            for dy in 0..self.ky {
                for dx in 0..self.kx {
                    let r = (ci * self.ky + dy) * self.kx + dx;
                    let dst = &mut col[r * len..(r + 1) * len];
                    let (lo, hi) = self.valid_cols(dx);
                    for j in 0..nrows {
                        let drow = &mut dst[j * self.wo..(j + 1) * self.wo];
                        let iy = (oy0 + j + dy) as isize - self.pad.top as isize;
                        if iy < 0 || iy >= self.h as isize {
                            drow.fill(T::zero());
                            continue;
                        }
                        let srow = &src_plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        drow[..lo].fill(T::zero());
                        drow[hi..].fill(T::zero());
                        if hi > lo {
                            let ix0 = lo + dx - self.pad.left;
                            drow[lo..hi].copy_from_slice(&srow[ix0..ix0 + (hi - lo)]);
                        }
                    }
                }
            }
        }
    }

    /// Scatter-adds `col` back into the input-shaped gradient `dx`.
    fn col2im<T: Real>(&self, col: &[T], oy0: usize, nrows: usize, dxs: &mut [T]) {
        let len = nrows * self.wo;
        let plane = self.h * self.w;
        for ci in 0..self.cin {
            let dst_plane = &mut dxs[ci * plane..(ci + 1) * plane];
            for dy in 0..self.ky {
                for dx in 0..self.kx {
                    let r = (ci * self.ky + dy) * self.kx + dx;
                    let src = &col[r * len..(r + 1) * len];
                    let (lo, hi) = self.valid_cols(dx);
                    if hi <= lo {
                        continue;
                    }
                    for j in 0..nrows {
                        let iy = (oy0 + j + dy) as isize - self.pad.top as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let ix0 = lo + dx - self.pad.left;
                        let drow = &mut dst_plane[iy as usize * self.w + ix0..][..hi - lo];
                        let srow = &src[j * self.wo + lo..j * self.wo + hi];
                        for (d, &s) in drow.iter_mut().zip(srow) {
                            *d += s;
                        }
                    }
                }
            }
        }
    }

    fn forward_image<T: Real>(&self, x: &[T], weight: &[T], bias: &[T], out: &mut [T]) {
        let p = self.out_plane();
        if self.pointwise() {
            gemm(
                T::one(),
                MatRef::new(weight, self.nf, self.cin, self.cin),
                MatRef::new(x, self.cin, p, p),
                T::zero(),
                MatMut::new(out, self.nf, p, p),
            );
        } else {
            let k = self.patch();
            let rows = self.chunk_rows();
            let mut col = vec![T::zero(); k * rows * self.wo];
            let mut oy0 = 0;
            while oy0 < self.ho {
                let nrows = rows.min(self.ho - oy0);
                let len = nrows * self.wo;
                self.im2col(x, oy0, nrows, &mut col[..k * len]);
                gemm(
                    T::one(),
                    MatRef::new(weight, self.nf, k, k),
                    MatRef::new(&col[..k * len], k, len, len),
                    T::zero(),
                    MatMut::new(&mut out[oy0 * self.wo..], self.nf, len, p),
                );
                oy0 += nrows;
            }
        }
        for (f, &b) in bias.iter().enumerate() {
            out[f * p..(f + 1) * p].iter_mut().for_each(|v| *v += b);
        }
    }

    /// Returns `(input grad, weight grad, bias grad)` for one batch image.
    fn backward_image<T: Real>(&self, x: &[T], weight: &[T], dy: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let p = self.out_plane();
        let k = self.patch();
        let db: Vec<T> = (0..self.nf)
            .map(|f| dy[f * p..(f + 1) * p].iter().copied().sum())
            .collect();
        let mut dw = vec![T::zero(); self.nf * k];
        let mut dx = vec![T::zero(); self.cin * self.h * self.w];
        if self.pointwise() {
            gemm(
                T::one(),
                MatRef::new(dy, self.nf, p, p),
                MatRef::new(x, self.cin, p, p).t(),
                T::zero(),
                MatMut::new(&mut dw, self.nf, self.cin, self.cin),
            );
            gemm(
                T::one(),
                MatRef::new(weight, self.nf, self.cin, self.cin).t(),
                MatRef::new(dy, self.nf, p, p),
                T::zero(),
                MatMut::new(&mut dx, self.cin, p, p),
            );
        } else {
            let rows = self.chunk_rows();
            let mut col = vec![T::zero(); k * rows * self.wo];
            let mut dcol = vec![T::zero(); k * rows * self.wo];
            let mut oy0 = 0;
            while oy0 < self.ho {
                let nrows = rows.min(self.ho - oy0);
                let len = nrows * self.wo;
                let dy_chunk = MatRef::new(&dy[oy0 * self.wo..], self.nf, len, p);
                self.im2col(x, oy0, nrows, &mut col[..k * len]);
                gemm(
                    T::one(),
                    dy_chunk,
                    MatRef::new(&col[..k * len], k, len, len).t(),
                    T::one(),
                    MatMut::new(&mut dw, self.nf, k, k),
                );
                gemm(
                    T::one(),
                    MatRef::new(weight, self.nf, k, k).t(),
                    dy_chunk,
                    T::zero(),
                    MatMut::new(&mut dcol[..k * len], k, len, len),
                );
                self.col2im(&dcol[..k * len], oy0, nrows, &mut dx);
                oy0 += nrows;
            }
        }
        (dx, dw, db)
    }
}

/// Convolution of `input` with `weight` `(n_f, c, k_y, k_x)` plus `bias`.
pub fn conv2d<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &[T],
    padding: Padding,
) -> Result<Tensor<T>, TensorError> {
    let g = Geometry::new(input.shape(), weight.shape(), bias.len(), padding)?;
    let batch = input.shape().batch;
    let out_shape = g.output_shape(batch);
    let per_image = out_shape.image_len();
    let images = exec::map_indices(batch, |b| {
        let mut out = vec![T::zero(); per_image];
        g.forward_image(input.image(b), weight.data(), bias, &mut out);
        out
    });
    let mut data = Vec::with_capacity(out_shape.len());
    images.into_iter().for_each(|img| data.extend(img));
    Tensor::from_vec(out_shape, data)
}

pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
) -> Result<Tensor<T>, TensorError> {
    conv2d(input, &params.weight, &params.bias, params.padding)
}

/// Backward pass for [`conv2d`]. Weight and bias gradients are summed over
/// the batch in batch order.
pub fn conv2d_backward_with<T: Real>(
    output_grad: &Tensor<T>,
    input: &Tensor<T>,
    weight: &Tensor<T>,
    padding: Padding,
) -> Result<ConvGrads<T>, TensorError> {
    let g = Geometry::new(input.shape(), weight.shape(), weight.shape().batch, padding)?;
    let batch = input.shape().batch;
    g.output_shape(batch)
        .expect("conv2d backward", &output_grad.shape())?;
    let parts = exec::map_indices(batch, |b| {
        g.backward_image(input.image(b), weight.data(), output_grad.image(b))
    });

    let mut dx = Vec::with_capacity(input.len());
    let mut dw = vec![T::zero(); weight.len()];
    let mut db = vec![T::zero(); g.nf];
    for (dxi, dwi, dbi) in parts {
        dx.extend(dxi);
        dw.iter_mut().zip(&dwi).for_each(|(a, &b)| *a += b);
        db.iter_mut().zip(&dbi).for_each(|(a, &b)| *a += b);
    }
    Ok(ConvGrads {
        input: Tensor::from_vec(input.shape(), dx)?,
        weight: Tensor::from_vec(weight.shape(), dw)?,
        bias: db,
    })
}

pub fn conv2d_backward<T: Real>(
    output_grad: &Tensor<T>,
    input: &Tensor<T>,
    params: &ConvParams<T>,
) -> Result<ConvGrads<T>, TensorError> {
    if params.bias.len() != params.weight.shape().batch {
        return Err(TensorError::Dimension {
            op: "conv2d bias",
            axis: Axis::Channels,
            expected: params.weight.shape().batch,
            actual: params.bias.len(),
        });
    }
    conv2d_backward_with(output_grad, input, &params.weight, params.padding)
}
