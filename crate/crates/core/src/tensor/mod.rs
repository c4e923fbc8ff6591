//! Dense NCHW tensors and the differentiable layer kernels used by the
//! super-resolution architectures.
//!
//! Every kernel is a pure function of its inputs. Backward functions return
//! gradients explicitly; only [`Parameter`] carries persistent gradient
//! storage, which the optimizer consumes.

mod activation;
mod adam;
mod batchnorm;
mod conv;
mod shuffle;
mod weight_norm;

use std::fmt;

use thiserror::Error;

use crate::real::Real;

pub use activation::{activation_backward, activation_forward, ActivationKind, ActivationSpec};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use batchnorm::{
    batch_norm, batch_norm_backward, BatchNormCache, BatchNormMode, BatchNormState, RunningStats,
};
pub use conv::{
    conv2d, conv2d_backward, conv2d_backward_with, conv2d_forward, ConvGrads, ConvParams, Padding,
};
pub use shuffle::{depth_to_space, space_to_depth};
pub use weight_norm::{weight_norm_backward, weight_norm_materialize};

/// Tensor axis, used in dimension errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Batch,
    Channels,
    Height,
    Width,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Batch => "batch",
            Axis::Channels => "channels",
            Axis::Height => "height",
            Axis::Width => "width",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: {axis} mismatch (expected {expected}, got {actual})")]
    Dimension {
        op: &'static str,
        axis: Axis,
        expected: usize,
        actual: usize,
    },
    #[error("{op}: data length {actual} does not match shape {shape} (expected {expected})")]
    Length {
        op: &'static str,
        shape: Shape,
        expected: usize,
        actual: usize,
    },
    #[error("{op}: kernel {ky}x{kx} must have odd sides")]
    EvenKernel {
        op: &'static str,
        ky: usize,
        kx: usize,
    },
    #[error("{op}: padded input is smaller than the kernel")]
    EmptyOutput { op: &'static str },
    #[error("{op}: {channels} channels are not divisible by {divisor}")]
    IndivisibleChannels {
        op: &'static str,
        channels: usize,
        divisor: usize,
    },
    #[error("batch norm needs at least 2 values per channel in training mode, got {0}")]
    InsufficientPopulation(usize),
    #[error("batch norm inference requested before any training statistics were recorded")]
    UninitializedStatistics,
    #[error("weight norm: filter {filter} has zero norm")]
    DegenerateFilter { filter: usize },
    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },
    #[error("learning rate must be non-negative and finite, got {0}")]
    InvalidLearningRate(f64),
}

/// Tensor shape `(batch, channels, height, width)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Shape {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        Shape {
            batch,
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.batch * self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixels per channel plane.
    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    /// Values per batch item.
    pub fn image_len(&self) -> usize {
        self.channels * self.plane()
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.batch, self.channels, self.height, self.width]
    }

    pub fn from_dims(d: [usize; 4]) -> Self {
        Shape::new(d[0], d[1], d[2], d[3])
    }

    pub(crate) fn expect(&self, op: &'static str, other: &Shape) -> Result<(), TensorError> {
        let pairs = [
            (Axis::Batch, self.batch, other.batch),
            (Axis::Channels, self.channels, other.channels),
            (Axis::Height, self.height, other.height),
            (Axis::Width, self.width, other.width),
        ];
        for (axis, expected, actual) in pairs {
            if expected != actual {
                return Err(TensorError::Dimension {
                    op,
                    axis,
                    expected,
                    actual,
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.batch, self.channels, self.height, self.width
        )
    }
}

/// Dense 4-D tensor in NCHW order with optional gradient storage.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.len()],
            grad: None,
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self, TensorError> {
        if data.len() != shape.len() {
            return Err(TensorError::Length {
                op: "tensor",
                shape,
                expected: shape.len(),
                actual: data.len(),
            });
        }
        Ok(Tensor {
            shape,
            data,
            grad: None,
        })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for b in 0..shape.batch {
            for c in 0..shape.channels {
                for y in 0..shape.height {
                    for x in 0..shape.width {
                        data.push(f(b, c, y, x));
                    }
                }
            }
        }
        Tensor {
            shape,
            data,
            grad: None,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        let s = &self.shape;
        ((b * s.channels + c) * s.height + y) * s.width + x
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.index(b, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, v: T) {
        let i = self.index(b, c, y, x);
        self.data[i] = v;
    }

    /// Values of batch item `b`.
    pub fn image(&self, b: usize) -> &[T] {
        let n = self.shape.image_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn image_mut(&mut self, b: usize) -> &mut [T] {
        let n = self.shape.image_len();
        &mut self.data[b * n..(b + 1) * n]
    }

    /// Same data, new shape with the same element count.
    pub fn reshape(self, shape: Shape) -> Result<Self, TensorError> {
        if shape.len() != self.data.len() {
            return Err(TensorError::Length {
                op: "reshape",
                shape,
                expected: shape.len(),
                actual: self.data.len(),
            });
        }
        Ok(Tensor {
            shape,
            data: self.data,
            grad: self.grad,
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
            grad: None,
        }
    }

    /// Elementwise sum; shapes must match.
    pub fn add(&self, other: &Tensor<T>) -> Result<Self, TensorError> {
        self.shape.expect("add", &other.shape)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Tensor {
            shape: self.shape,
            data,
            grad: None,
        })
    }

    /// `self += other`; shapes must match.
    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<(), TensorError> {
        self.shape.expect("add", &other.shape)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Gradient storage, allocated as zeros on first use.
    pub fn grad_mut(&mut self) -> &mut [T] {
        let n = self.data.len();
        self.grad.get_or_insert_with(|| vec![T::zero(); n])
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Adds `delta` into the gradient storage.
    pub fn accumulate_grad(&mut self, delta: &[T]) -> Result<(), TensorError> {
        if delta.len() != self.data.len() {
            return Err(TensorError::Length {
                op: "accumulate_grad",
                shape: self.shape,
                expected: self.data.len(),
                actual: delta.len(),
            });
        }
        for (g, &d) in self.grad_mut().iter_mut().zip(delta) {
            *g += d;
        }
        Ok(())
    }

    /// Converts to another scalar type (gradient dropped).
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::lit(v.f64())).collect(),
            grad: None,
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.f64() - b.f64()).abs())
            .fold(0.0, f64::max)
    }
}

/// A named learnable tensor with its gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
}

impl<T: Real> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        Parameter {
            name: name.into(),
            value,
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}
