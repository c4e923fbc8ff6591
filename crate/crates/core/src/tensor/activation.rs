//! The rectifier family `max(0, y) - alpha * max(0, -y)`.

use super::{Axis, Tensor, TensorError};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    /// `alpha = 0`.
    Relu,
    /// Constant `alpha`.
    LeakyRelu,
    /// Learnable `alpha`, one per channel.
    Prelu,
}

/// Activation kind plus its slope(s).
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationSpec<T> {
    pub kind: ActivationKind,
    pub alpha: Vec<T>,
}

impl<T: Real> ActivationSpec<T> {
    pub fn relu() -> Self {
        ActivationSpec {
            kind: ActivationKind::Relu,
            alpha: Vec::new(),
        }
    }

    pub fn leaky(alpha: T) -> Self {
        ActivationSpec {
            kind: ActivationKind::LeakyRelu,
            alpha: vec![alpha],
        }
    }

    pub fn prelu(alpha: Vec<T>) -> Self {
        ActivationSpec {
            kind: ActivationKind::Prelu,
            alpha,
        }
    }

    fn slopes(&self, channels: usize) -> Result<Vec<T>, TensorError> {
        match self.kind {
            ActivationKind::Relu => Ok(vec![T::zero(); channels]),
            ActivationKind::LeakyRelu => {
                let a = self.alpha.first().copied().unwrap_or_else(T::zero);
                Ok(vec![a; channels])
            }
            ActivationKind::Prelu => {
                if self.alpha.len() != channels {
                    return Err(TensorError::Dimension {
                        op: "prelu alpha",
                        axis: Axis::Channels,
                        expected: channels,
                        actual: self.alpha.len(),
                    });
                }
                Ok(self.alpha.clone())
            }
        }
    }
}

pub fn activation_forward<T: Real>(
    t: &Tensor<T>,
    spec: &ActivationSpec<T>,
) -> Result<Tensor<T>, TensorError> {
    let s = t.shape();
    let slopes = spec.slopes(s.channels)?;
    let plane = s.plane();
    let mut out = t.clone();
    out.clear_grad();
    for (i, chunk) in out.data_mut().chunks_mut(plane.max(1)).enumerate() {
        let a = slopes[i % s.channels.max(1)];
        for v in chunk {
            if *v < T::zero() {
                *v = a * *v;
            }
        }
    }
    Ok(out)
}

/// Returns the input gradient and, for PReLU, the per-channel alpha gradient.
pub fn activation_backward<T: Real>(
    output_grad: &Tensor<T>,
    input: &Tensor<T>,
    spec: &ActivationSpec<T>,
) -> Result<(Tensor<T>, Option<Vec<T>>), TensorError> {
    let s = input.shape();
    s.expect("activation backward", &output_grad.shape())?;
    let slopes = spec.slopes(s.channels)?;
    let plane = s.plane().max(1);
    let mut dx = output_grad.clone();
    dx.clear_grad();
    let mut dalpha = vec![T::zero(); s.channels];
    for (i, (dchunk, xchunk)) in dx
        .data_mut()
        .chunks_mut(plane)
        .zip(input.data().chunks(plane))
        .enumerate()
    {
        let c = i % s.channels.max(1);
        let a = slopes[c];
        let mut acc = T::zero();
        for (d, &x) in dchunk.iter_mut().zip(xchunk) {
            if x <= T::zero() {
                acc += *d * x;
                *d = a * *d;
            }
        }
        dalpha[c] += acc;
    }
    let dalpha = (spec.kind == ActivationKind::Prelu).then_some(dalpha);
    Ok((dx, dalpha))
}
