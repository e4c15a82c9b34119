//! Convolution, nonlinearities and pooling.
//!
//! Convolution is cross-correlation: each output sample is the dot product
//! of the kernel with the co-located input window, no kernel flipping.
//! Accumulation runs in f64 to bound drift; samples stay f32.

use super::{FilterBank, Volume};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output shrinks by kernel-1 per axis; kernel must fit inside input.
    Valid,
    /// Zero-padded so spatial/temporal dims are preserved; centered,
    /// favoring the lower index on even kernels.
    Same,
}

/// Pointwise nonlinearity applied after a convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    Identity,
    Relu,
    /// exp(x_k)/sum_j exp(x_j) across the channel axis per (x, y, t) site.
    Softmax,
    Square,
    /// Requires all samples >= 0.
    Sqrt,
}

/// 3-D cross-correlation of `input` with every kernel in `bank`.
///
/// Output has one channel per kernel. `Valid` shrinks spatial/temporal dims
/// by kernel-1; `Same` preserves them with centered zero padding.
pub fn conv3d(input: &Volume, bank: &FilterBank, padding: Padding) -> Result<Volume> {
    let [kx, ky, kt, c_in] = bank.kernel_shape();
    if c_in != input.nc() {
        return Err(Error::ChannelMismatch {
            input: input.nc(),
            expected: c_in,
        });
    }
    let [nx, ny, nt, _] = input.dims();

    let (ox, oy, ot, px, py, pt) = match padding {
        Padding::Valid => {
            if kx > nx || ky > ny || kt > nt {
                return Err(Error::KernelTooLarge {
                    kernel: [kx, ky, kt],
                    input: [nx, ny, nt],
                });
            }
            (nx - kx + 1, ny - ky + 1, nt - kt + 1, 0isize, 0isize, 0isize)
        }
        Padding::Same => (
            nx,
            ny,
            nt,
            ((kx - 1) / 2) as isize,
            ((ky - 1) / 2) as isize,
            ((kt - 1) / 2) as isize,
        ),
    };

    let k = bank.num_filters();
    let mut out = Volume::zeros([ox, oy, ot, k]);
    for (ko, kernel) in bank.kernels().iter().enumerate() {
        for t in 0..ot {
            for y in 0..oy {
                for x in 0..ox {
                    let mut acc = 0.0f64;
                    for kc in 0..c_in {
                        for dt in 0..kt {
                            let it = t as isize + dt as isize - pt;
                            if it < 0 || it >= nt as isize {
                                continue;
                            }
                            for dy in 0..ky {
                                let iy = y as isize + dy as isize - py;
                                if iy < 0 || iy >= ny as isize {
                                    continue;
                                }
                                for dx in 0..kx {
                                    let ix = x as isize + dx as isize - px;
                                    if ix < 0 || ix >= nx as isize {
                                        continue;
                                    }
                                    acc += kernel.get(dx, dy, dt, kc) as f64
                                        * input.get(ix as usize, iy as usize, it as usize, kc)
                                            as f64;
                                }
                            }
                        }
                    }
                    out.set(x, y, t, ko, acc as f32);
                }
            }
        }
    }
    Ok(out)
}

/// Applies a pointwise nonlinearity; softmax normalizes across channels per
/// site, sqrt errors on negative samples.
pub fn apply_nonlinearity(input: &Volume, kind: Nonlinearity) -> Result<Volume> {
    match kind {
        Nonlinearity::Identity => Ok(input.clone()),
        Nonlinearity::Relu => {
            let mut out = input.clone();
            for v in out.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            Ok(out)
        }
        Nonlinearity::Square => {
            let mut out = input.clone();
            for v in out.data_mut() {
                *v *= *v;
            }
            Ok(out)
        }
        Nonlinearity::Sqrt => {
            let mut out = input.clone();
            for (i, v) in out.data_mut().iter_mut().enumerate() {
                if *v < 0.0 {
                    return Err(Error::invalid(
                        "sqrt",
                        format!("negative sample {v} at index {i}"),
                    ));
                }
                *v = v.sqrt();
            }
            Ok(out)
        }
        Nonlinearity::Softmax => {
            let [nx, ny, nt, nc] = input.dims();
            let mut out = input.clone();
            for t in 0..nt {
                for y in 0..ny {
                    for x in 0..nx {
                        // shift by the per-site max for stability
                        let mut max = f32::NEG_INFINITY;
                        for c in 0..nc {
                            max = max.max(input.get(x, y, t, c));
                        }
                        let mut sum = 0.0f64;
                        for c in 0..nc {
                            sum += ((input.get(x, y, t, c) - max) as f64).exp();
                        }
                        for c in 0..nc {
                            let e = ((input.get(x, y, t, c) - max) as f64).exp();
                            out.set(x, y, t, c, (e / sum) as f32);
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Kind of local pooling window reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalPoolKind {
    Sum,
    Max,
}

/// Non-overlapping local pooling with stride = window size; boundary
/// leftovers are pooled as partial windows. Channels are preserved.
pub fn local_pool(input: &Volume, kind: LocalPoolKind, size: (usize, usize, usize)) -> Result<Volume> {
    let (dx, dy, dt) = size;
    if dx == 0 || dy == 0 || dt == 0 {
        return Err(Error::invalid("size", format!("pool size must be >= 1, got {size:?}")));
    }
    let [nx, ny, nt, nc] = input.dims();
    let ox = nx.div_ceil(dx);
    let oy = ny.div_ceil(dy);
    let ot = nt.div_ceil(dt);
    let mut out = Volume::zeros([ox, oy, ot, nc]);
    for c in 0..nc {
        for t in 0..ot {
            let t0 = t * dt;
            let t1 = (t0 + dt).min(nt);
            for y in 0..oy {
                let y0 = y * dy;
                let y1 = (y0 + dy).min(ny);
                for x in 0..ox {
                    let x0 = x * dx;
                    let x1 = (x0 + dx).min(nx);
                    let v = match kind {
                        LocalPoolKind::Sum => {
                            let mut acc = 0.0f64;
                            for it in t0..t1 {
                                for iy in y0..y1 {
                                    for ix in x0..x1 {
                                        acc += input.get(ix, iy, it, c) as f64;
                                    }
                                }
                            }
                            acc as f32
                        }
                        LocalPoolKind::Max => {
                            let mut m = f32::NEG_INFINITY;
                            for it in t0..t1 {
                                for iy in y0..y1 {
                                    for ix in x0..x1 {
                                        m = m.max(input.get(ix, iy, it, c));
                                    }
                                }
                            }
                            m
                        }
                    };
                    out.set(x, y, t, c, v);
                }
            }
        }
    }
    Ok(out)
}

/// Per-channel sum over all (x, y, t) sites.
pub fn global_sum_pool(input: &Volume) -> Vec<f32> {
    let [nx, ny, nt, nc] = input.dims();
    let mut out = vec![0.0f32; nc];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0f64;
        for t in 0..nt {
            for y in 0..ny {
                for x in 0..nx {
                    acc += input.get(x, y, t, c) as f64;
                }
            }
        }
        *slot = acc as f32;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vol(dims: [usize; 4], data: &[f32]) -> Volume {
        Volume::from_vec(dims, data.to_vec()).unwrap()
    }

    #[test]
    fn conv_valid_hand_example() {
        // 2x2 input [[1,2],[3,4]], kernel [[1,0],[0,-1]] -> 1*1 + 4*(-1) = -3
        let input = vol([2, 2, 1, 1], &[1.0, 2.0, 3.0, 4.0]);
        let bank = FilterBank::from_rows([2, 2, 1, 1], &[vec![1.0, 0.0, 0.0, -1.0]]).unwrap();
        let out = conv3d(&input, &bank, Padding::Valid).unwrap();
        assert_eq!(out.dims(), [1, 1, 1, 1]);
        assert_eq!(out.get(0, 0, 0, 0), -3.0);
    }

    #[test]
    fn conv_identity_kernel_preserves_input() {
        let input = Volume::from_fn([3, 4, 2, 1], |x, y, t, _| (x + 10 * y + 100 * t) as f32);
        let bank = FilterBank::from_rows([1, 1, 1, 1], &[vec![1.0]]).unwrap();
        let out = conv3d(&input, &bank, Padding::Valid).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn conv_all_ones_counts_window() {
        let input = vol([4, 4, 2, 1], &[1.0; 32]);
        let bank = FilterBank::from_rows([2, 2, 2, 1], &[vec![1.0; 8]]).unwrap();
        let out = conv3d(&input, &bank, Padding::Valid).unwrap();
        assert_eq!(out.dims(), [3, 3, 1, 1]);
        assert!(out.data().iter().all(|&v| v == 8.0));
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let input = Volume::zeros([2, 2, 1, 2]);
        let bank = FilterBank::from_rows([1, 1, 1, 1], &[vec![1.0]]).unwrap();
        assert!(matches!(
            conv3d(&input, &bank, Padding::Valid),
            Err(Error::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn conv_rejects_oversize_kernel_under_valid() {
        let input = Volume::zeros([2, 2, 1, 1]);
        let bank = FilterBank::new(vec![Volume::zeros([3, 3, 1, 1])]).unwrap();
        assert!(matches!(
            conv3d(&input, &bank, Padding::Valid),
            Err(Error::KernelTooLarge { .. })
        ));
    }

    #[test]
    fn conv_same_preserves_dims() {
        let input = Volume::from_fn([5, 4, 3, 1], |x, y, t, _| (x + y + t) as f32);
        let bank = FilterBank::from_rows([3, 3, 1, 1], &[vec![0.0; 9]]).unwrap();
        let out = conv3d(&input, &bank, Padding::Same).unwrap();
        assert_eq!(out.dims(), [5, 4, 3, 1]);
    }

    #[test]
    fn relu_clamps_negatives() {
        let v = vol([3, 1, 1, 1], &[-2.0, 0.0, 3.0]);
        let out = apply_nonlinearity(&v, Nonlinearity::Relu).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0, 3.0]);
    }

    #[test]
    fn softmax_symmetric_pair() {
        let v = vol([1, 1, 1, 2], &[0.0, 0.0]);
        let out = apply_nonlinearity(&v, Nonlinearity::Softmax).unwrap();
        assert!((out.get(0, 0, 0, 0) - 0.5).abs() < 1e-6);
        assert!((out.get(0, 0, 0, 1) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn square_then_sqrt_is_abs() {
        let v = vol([2, 1, 1, 1], &[-3.0, 4.0]);
        let sq = apply_nonlinearity(&v, Nonlinearity::Square).unwrap();
        let out = apply_nonlinearity(&sq, Nonlinearity::Sqrt).unwrap();
        assert_eq!(out.data(), &[3.0, 4.0]);
    }

    #[test]
    fn sqrt_rejects_negative() {
        let v = vol([1, 1, 1, 1], &[-1.0]);
        assert!(apply_nonlinearity(&v, Nonlinearity::Sqrt).is_err());
    }

    #[test]
    fn local_sum_counts_ones() {
        let input = vol([4, 4, 2, 1], &[1.0; 32]);
        let out = local_pool(&input, LocalPoolKind::Sum, (2, 2, 2)).unwrap();
        assert_eq!(out.dims(), [2, 2, 1, 1]);
        assert!(out.data().iter().all(|&v| v == 8.0));
    }

    #[test]
    fn local_max_finds_spike() {
        let mut input = Volume::zeros([2, 2, 1, 1]);
        input.set(1, 0, 0, 0, 5.0);
        let out = local_pool(&input, LocalPoolKind::Max, (2, 2, 1)).unwrap();
        assert_eq!(out.get(0, 0, 0, 0), 5.0);
    }

    #[test]
    fn local_sum_clips_boundary() {
        let input = vol([4, 1, 1, 1], &[1.0, 2.0, 3.0, 4.0]);
        let out = local_pool(&input, LocalPoolKind::Sum, (2, 1, 1)).unwrap();
        assert_eq!(out.data(), &[3.0, 7.0]);
        // odd length leaves a partial window pooled as-is
        let input = vol([3, 1, 1, 1], &[1.0, 2.0, 3.0]);
        let out = local_pool(&input, LocalPoolKind::Sum, (2, 1, 1)).unwrap();
        assert_eq!(out.data(), &[3.0, 3.0]);
    }

    #[test]
    fn local_pool_rejects_zero_size() {
        let input = Volume::zeros([2, 2, 1, 1]);
        assert!(local_pool(&input, LocalPoolKind::Sum, (0, 1, 1)).is_err());
    }

    #[test]
    fn global_sum_counts_ones() {
        let input = vol([2, 2, 2, 1], &[1.0; 8]);
        assert_eq!(global_sum_pool(&input), vec![8.0]);
    }

    #[test]
    fn global_sum_per_channel() {
        let input = Volume::from_fn([3, 1, 1, 2], |_, _, _, c| if c == 0 { 1.0 } else { -1.0 });
        assert_eq!(global_sum_pool(&input), vec![3.0, -3.0]);
    }
}
