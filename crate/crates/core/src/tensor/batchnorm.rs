//! Per-channel batch normalization with running statistics.

use super::{Axis, Tensor, TensorError};
use crate::real::Real;

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchNormMode {
    /// Normalize with batch statistics and update the running estimates.
    Train,
    /// Normalize with the running estimates.
    Inference,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

/// Non-learned batch-norm state. `running` is `None` until the first
/// training-mode call, which seeds it with that batch's statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState<T> {
    pub momentum: f64,
    pub eps: f64,
    pub running: Option<RunningStats<T>>,
}

impl<T: Real> Default for BatchNormState<T> {
    fn default() -> Self {
        BatchNormState {
            momentum: DEFAULT_MOMENTUM,
            eps: DEFAULT_EPS,
            running: None,
        }
    }
}

/// Values saved by a training-mode forward pass.
#[derive(Clone, Debug)]
pub struct BatchNormCache<T> {
    normalized: Tensor<T>,
    inv_std: Vec<T>,
}

impl<T: Real> BatchNormCache<T> {
    /// The standardized input, before scale and shift.
    pub fn normalized(&self) -> &Tensor<T> {
        &self.normalized
    }
}

fn check_affine<T>(channels: usize, gamma: &[T], beta: &[T]) -> Result<(), TensorError> {
    for (what, len) in [
        ("batch norm scale", gamma.len()),
        ("batch norm shift", beta.len()),
    ] {
        if len != channels {
            return Err(TensorError::Dimension {
                op: what,
                axis: Axis::Channels,
                expected: channels,
                actual: len,
            });
        }
    }
    Ok(())
}

/// Applies batch normalization. The cache is only returned in training mode.
pub fn batch_norm<T: Real>(
    t: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    state: &mut BatchNormState<T>,
    mode: BatchNormMode,
) -> Result<(Tensor<T>, Option<BatchNormCache<T>>), TensorError> {
    let s = t.shape();
    check_affine(s.channels, gamma, beta)?;
    let plane = s.plane();
    let population = s.batch * plane;
    let eps = T::lit(state.eps);

    let (mean, var) = match mode {
        BatchNormMode::Inference => {
            let r = state
                .running
                .as_ref()
                .ok_or(TensorError::UninitializedStatistics)?;
            (r.mean.clone(), r.var.clone())
        }
        BatchNormMode::Train => {
            if population < 2 {
                return Err(TensorError::InsufficientPopulation(population));
            }
            let n = T::lit(population as f64);
            let mut mean = vec![T::zero(); s.channels];
            let mut var = vec![T::zero(); s.channels];
            for c in 0..s.channels {
                let mut sum = T::zero();
                for b in 0..s.batch {
                    sum += t.image(b)[c * plane..(c + 1) * plane]
                        .iter()
                        .copied()
                        .sum::<T>();
                }
                let mut m = sum / n;
                // One refinement pass on the mean.
                let mut resid = T::zero();
                for b in 0..s.batch {
                    resid += t.image(b)[c * plane..(c + 1) * plane]
                        .iter()
                        .map(|&v| v - m)
                        .sum::<T>();
                }
                m += resid / n;
                let mut sq = T::zero();
                for b in 0..s.batch {
                    for &v in &t.image(b)[c * plane..(c + 1) * plane] {
                        sq += (v - m) * (v - m);
                    }
                }
                mean[c] = m;
                var[c] = sq / n;
            }
            let mom = T::lit(state.momentum);
            match state.running.as_mut() {
                None => {
                    state.running = Some(RunningStats {
                        mean: mean.clone(),
                        var: var.clone(),
                    })
                }
                Some(r) => {
                    for c in 0..s.channels {
                        r.mean[c] = mom * r.mean[c] + (T::one() - mom) * mean[c];
                        r.var[c] = mom * r.var[c] + (T::one() - mom) * var[c];
                    }
                }
            }
            (mean, var)
        }
    };
    if mean.len() != s.channels {
        return Err(TensorError::Dimension {
            op: "batch norm statistics",
            axis: Axis::Channels,
            expected: s.channels,
            actual: mean.len(),
        });
    }

    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut normalized = Tensor::zeros(s);
    let mut out = Tensor::zeros(s);
    for b in 0..s.batch {
        let src = t.image(b);
        let nimg = normalized.image_mut(b);
        for c in 0..s.channels {
            for i in c * plane..(c + 1) * plane {
                nimg[i] = (src[i] - mean[c]) * inv_std[c];
            }
        }
        let nimg = normalized.image(b).to_vec();
        let oimg = out.image_mut(b);
        for c in 0..s.channels {
            for i in c * plane..(c + 1) * plane {
                oimg[i] = gamma[c] * nimg[i] + beta[c];
            }
        }
    }
    let cache = (mode == BatchNormMode::Train).then_some(BatchNormCache {
        normalized,
        inv_std,
    });
    Ok((out, cache))
}

/// Training-mode backward pass. Returns `(input grad, scale grad, shift grad)`.
pub fn batch_norm_backward<T: Real>(
    output_grad: &Tensor<T>,
    cache: &BatchNormCache<T>,
    gamma: &[T],
) -> Result<(Tensor<T>, Vec<T>, Vec<T>), TensorError> {
    let s = cache.normalized.shape();
    s.expect("batch norm backward", &output_grad.shape())?;
    check_affine(s.channels, gamma, gamma)?;
    let plane = s.plane();
    let n = T::lit((s.batch * plane) as f64);
    let mut dgamma = vec![T::zero(); s.channels];
    let mut dbeta = vec![T::zero(); s.channels];
    for b in 0..s.batch {
        let dy = output_grad.image(b);
        let xh = cache.normalized.image(b);
        for c in 0..s.channels {
            for i in c * plane..(c + 1) * plane {
                dbeta[c] += dy[i];
                dgamma[c] += dy[i] * xh[i];
            }
        }
    }
    let mut dx = Tensor::zeros(s);
    for b in 0..s.batch {
        let dy = output_grad.image(b);
        let xh = cache.normalized.image(b);
        let out = dx.image_mut(b);
        for c in 0..s.channels {
            let k = gamma[c] * cache.inv_std[c] / n;
            for i in c * plane..(c + 1) * plane {
                out[i] = k * (n * dy[i] - dbeta[c] - xh[i] * dgamma[c]);
            }
        }
    }
    Ok((dx, dgamma, dbeta))
}
