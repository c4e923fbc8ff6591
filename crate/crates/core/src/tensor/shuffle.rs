//! Depth-to-space (pixel shuffle) and its inverse.

use super::{Axis, Shape, Tensor, TensorError};
use crate::real::Real;

/// `(B, C*n^2, H, W) -> (B, C, nH, nW)` with
/// `out[b, c, n*y + dy, n*x + dx] = in[b, c*n^2 + dy*n + dx, y, x]`.
pub fn depth_to_space<T: Real>(t: &Tensor<T>, n: usize) -> Result<Tensor<T>, TensorError> {
    let s = t.shape();
    let nn = n * n;
    if n == 0 || s.channels % nn != 0 {
        return Err(TensorError::IndivisibleChannels {
            op: "depth_to_space",
            channels: s.channels,
            divisor: nn,
        });
    }
    let oc = s.channels / nn;
    let os = Shape::new(s.batch, oc, s.height * n, s.width * n);
    let mut out = vec![T::zero(); s.len()];
    let ow = os.width;
    for b in 0..s.batch {
        let src = t.image(b);
        let dst = &mut out[b * os.image_len()..(b + 1) * os.image_len()];
        for c in 0..oc {
            for dy in 0..n {
                for dx in 0..n {
                    let ic = c * nn + dy * n + dx;
                    let plane = &src[ic * s.plane()..(ic + 1) * s.plane()];
                    for y in 0..s.height {
                        let row = &plane[y * s.width..(y + 1) * s.width];
                        let base = c * os.plane() + (y * n + dy) * ow + dx;
                        for (x, &v) in row.iter().enumerate() {
                            dst[base + x * n] = v;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(os, out)
}

/// Exact inverse of [`depth_to_space`].
pub fn space_to_depth<T: Real>(t: &Tensor<T>, n: usize) -> Result<Tensor<T>, TensorError> {
    let s = t.shape();
    if n == 0 {
        return Err(TensorError::IndivisibleChannels {
            op: "space_to_depth",
            channels: s.channels,
            divisor: 0,
        });
    }
    for (axis, len) in [(Axis::Height, s.height), (Axis::Width, s.width)] {
        if len % n != 0 {
            return Err(TensorError::Dimension {
                op: "space_to_depth",
                axis,
                expected: len - len % n,
                actual: len,
            });
        }
    }
    let nn = n * n;
    let os = Shape::new(s.batch, s.channels * nn, s.height / n, s.width / n);
    let mut out = vec![T::zero(); s.len()];
    for b in 0..s.batch {
        let src = t.image(b);
        let dst = &mut out[b * os.image_len()..(b + 1) * os.image_len()];
        for c in 0..s.channels {
            for dy in 0..n {
                for dx in 0..n {
                    let oc = c * nn + dy * n + dx;
                    for y in 0..os.height {
                        for x in 0..os.width {
                            dst[(oc * os.height + y) * os.width + x] =
                                src[(c * s.height + y * n + dy) * s.width + x * n + dx];
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(os, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_block_layout() {
        let t = Tensor::<f64>::zeros(Shape::new(1, 16, 1, 1));
        assert_eq!(
            depth_to_space(&t, 4).unwrap().shape(),
            Shape::new(1, 1, 4, 4)
        );

        let t = Tensor::from_vec(Shape::new(1, 4, 1, 1), vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let y = depth_to_space(&t, 2).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 2, 2));
        assert_eq!(y.data(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn indivisible_channels() {
        let t = Tensor::<f64>::zeros(Shape::new(1, 6, 2, 2));
        assert_eq!(
            depth_to_space(&t, 2).unwrap_err(),
            TensorError::IndivisibleChannels {
                op: "depth_to_space",
                channels: 6,
                divisor: 4
            }
        );
    }

    #[test]
    fn matches_index_formula() {
        let n = 3;
        let t = Tensor::from_fn(Shape::new(2, 18, 2, 3), |b, c, y, x| {
            (b * 1000 + c * 100 + y * 10 + x) as f64
        });
        let y = depth_to_space(&t, n).unwrap();
        for b in 0..2 {
            for c in 0..2 {
                for yy in 0..2 {
                    for xx in 0..3 {
                        for dy in 0..n {
                            for dx in 0..n {
                                assert_eq!(
                                    y.at(b, c, n * yy + dy, n * xx + dx),
                                    t.at(b, c * 9 + dy * n + dx, yy, xx)
                                );
                            }
                        }
                    }
                }
            }
        }
    }
}
