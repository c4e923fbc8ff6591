//! Weight normalization: each filter is `g * v / |v|`.

use super::{Axis, Tensor, TensorError};
use crate::real::Real;

fn filter_norms<T: Real>(v: &Tensor<T>) -> Result<Vec<T>, TensorError> {
    let per = v.shape().image_len();
    v.data()
        .chunks(per.max(1))
        .enumerate()
        .map(|(f, chunk)| {
            let n = chunk.iter().map(|&x| x * x).sum::<T>().sqrt();
            if n > T::zero() && n.is_finite() {
                Ok(n)
            } else {
                Err(TensorError::DegenerateFilter { filter: f })
            }
        })
        .collect()
}

fn check_gains<T>(g: &[T], filters: usize) -> Result<(), TensorError> {
    if g.len() != filters {
        return Err(TensorError::Dimension {
            op: "weight norm gain",
            axis: Axis::Batch,
            expected: filters,
            actual: g.len(),
        });
    }
    Ok(())
}

/// Builds the effective filters from gains `g` (one per filter) and
/// directions `v` `(n_f, c, k_y, k_x)`.
pub fn weight_norm_materialize<T: Real>(g: &[T], v: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    check_gains(g, v.shape().batch)?;
    let norms = filter_norms(v)?;
    let per = v.shape().image_len();
    let mut w = v.clone();
    w.clear_grad();
    for (f, chunk) in w.data_mut().chunks_mut(per.max(1)).enumerate() {
        let scale = g[f] / norms[f];
        chunk.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(w)
}

/// Maps the effective-weight gradient onto `(dg, dv)`.
pub fn weight_norm_backward<T: Real>(
    g: &[T],
    v: &Tensor<T>,
    weight_grad: &Tensor<T>,
) -> Result<(Vec<T>, Tensor<T>), TensorError> {
    check_gains(g, v.shape().batch)?;
    v.shape()
        .expect("weight norm backward", &weight_grad.shape())?;
    let norms = filter_norms(v)?;
    let per = v.shape().image_len().max(1);
    let mut dg = vec![T::zero(); g.len()];
    let mut dv = weight_grad.clone();
    dv.clear_grad();
    for (f, (dchunk, vchunk)) in dv
        .data_mut()
        .chunks_mut(per)
        .zip(v.data().chunks(per))
        .enumerate()
    {
        let n = norms[f];
        let proj = dchunk.iter().zip(vchunk).map(|(&d, &x)| d * x).sum::<T>() / n;
        dg[f] = proj;
        let a = g[f] / n;
        let b = g[f] * proj / (n * n);
        for (d, &x) in dchunk.iter_mut().zip(vchunk) {
            *d = a * *d - b * x;
        }
    }
    Ok((dg, dv))
}
