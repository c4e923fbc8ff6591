//! Adam with bias correction.

use super::{Parameter, TensorError};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments for every parameter of a store.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Parameter<T>>) -> Self {
        let (first, second) = params
            .into_iter()
            .map(|p| (vec![T::zero(); p.len()], vec![T::zero(); p.len()]))
            .unzip();
        AdamState {
            config,
            step: 0,
            first,
            second,
        }
    }

    pub fn for_params(params: &[Parameter<T>]) -> Self {
        Self::new(AdamConfig::default(), params)
    }

    /// True when the moment arrays line up with `params`.
    pub fn matches(&self, params: &[Parameter<T>]) -> bool {
        self.first.len() == params.len()
            && self.second.len() == params.len()
            && params
                .iter()
                .zip(self.first.iter().zip(&self.second))
                .all(|(p, (m, v))| m.len() == p.len() && v.len() == p.len())
    }
}

/// One Adam update of every parameter from its stored gradient.
///
/// Gradients are checked for NaN/inf before anything is modified; a
/// parameter without gradient storage is treated as having zero gradient.
pub fn adam_step<T: Real>(
    params: &mut [Parameter<T>],
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<(), TensorError> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(TensorError::InvalidLearningRate(lr));
    }
    assert!(
        state.matches(params),
        "optimizer state does not match the parameter store"
    );
    if let Some(p) = params.iter().find(|p| {
        p.value
            .grad()
            .is_some_and(|g| g.iter().any(|v| !v.is_finite()))
    }) {
        return Err(TensorError::NonFiniteGradient {
            param: p.name.clone(),
        });
    }

    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
    let (ib1, ib2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
    let (bc1, bc2) = (T::lit(bc1), T::lit(bc2));
    let (lr, eps) = (T::lit(lr), T::lit(c.eps));

    for ((p, m), v) in params
        .iter_mut()
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        let Some(g) = p.value.grad().map(<[T]>::to_vec) else {
            // Zero gradient: the moments still decay.
            m.iter_mut().for_each(|x| *x *= b1);
            v.iter_mut().for_each(|x| *x *= b2);
            continue;
        };
        for (((w, &gi), mi), vi) in p
            .value
            .data_mut()
            .iter_mut()
            .zip(&g)
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mi = b1 * *mi + ib1 * gi;
            *vi = b2 * *vi + ib2 * gi * gi;
            if lr != T::zero() {
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
    Ok(())
}
