//! Rank-4 volumes and the convolution-pooling primitives everything else
//! composes.
//!
//! A [`Volume`] is a dense tensor of `f32` samples indexed `(x, y, t, c)`
//! with `x` varying fastest in memory. Filters are grouped into a
//! [`FilterBank`] whose kernels share one receptive-field shape and are
//! applied by 3-D cross-correlation (no kernel flipping). Cascades of
//! convolution and pooling layers are described by [`CascadeSpec`] and run
//! with [`cascade_eval`].

mod cascade;
mod fmt;
mod ops;

pub use cascade::{cascade_eval, cascade_eval_batch, CascadeOutput, CascadeSpec, Layer};
pub use fmt::{read_cvol, read_cvol_file, write_cvol, write_cvol_file, CVOL_MAGIC};
pub use ops::{
    apply_nonlinearity, conv3d, global_sum_pool, local_pool, LocalPoolKind, Nonlinearity, Padding,
};

use crate::error::{Error, Result};

/// Dense rank-4 tensor of finite `f32` samples indexed `(x, y, t, c)`.
///
/// Memory layout is x-fastest: `idx = x + nx*(y + ny*(t + nt*c))`, matching
/// the CVOL interchange format.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 4],
    data: Vec<f32>,
}

impl Volume {
    /// Builds a volume from raw samples in x-fastest order, validating the
    /// invariants: all dims >= 1, length matches, every sample finite.
    pub fn from_vec(dims: [usize; 4], data: Vec<f32>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::invalid("dims", format!("all dims must be >= 1, got {dims:?}")));
        }
        let expect = dims.iter().product::<usize>();
        if data.len() != expect {
            return Err(Error::ShapeMismatch {
                expected: format!("{expect} samples for dims {dims:?}"),
                got: format!("{} samples", data.len()),
            });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Volume { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        let len = dims.iter().product();
        Volume {
            dims,
            data: vec![0.0; len],
        }
    }

    /// Fills a volume by evaluating `f(x, y, t, c)` at every site.
    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Self {
        let mut v = Volume::zeros(dims);
        let [nx, ny, nt, nc] = dims;
        let mut idx = 0;
        for c in 0..nc {
            for t in 0..nt {
                for y in 0..ny {
                    for x in 0..nx {
                        v.data[idx] = f(x, y, t, c);
                        idx += 1;
                    }
                }
            }
        }
        v
    }

    #[inline]
    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.dims[0]
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.dims[1]
    }

    #[inline]
    pub fn nt(&self) -> usize {
        self.dims[2]
    }

    #[inline]
    pub fn nc(&self) -> usize {
        self.dims[3]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index_of(&self, x: usize, y: usize, t: usize, c: usize) -> usize {
        debug_assert!(x < self.dims[0] && y < self.dims[1] && t < self.dims[2] && c < self.dims[3]);
        x + self.dims[0] * (y + self.dims[1] * (t + self.dims[2] * c))
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, t: usize, c: usize) -> f32 {
        self.data[self.index_of(x, y, t, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, t: usize, c: usize, value: f32) {
        let i = self.index_of(x, y, t, c);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Copies one temporal slab `[t0, t1)` into a new volume.
    pub fn time_slice(&self, t0: usize, t1: usize) -> Result<Volume> {
        if t0 >= t1 || t1 > self.nt() {
            return Err(Error::invalid(
                "time_slice",
                format!("range {t0}..{t1} out of bounds for T={}", self.nt()),
            ));
        }
        let [nx, ny, _, nc] = self.dims;
        let out = Volume::from_fn([nx, ny, t1 - t0, nc], |x, y, t, c| self.get(x, y, t0 + t, c));
        Ok(out)
    }

    /// Extracts a single channel as a new 1-channel volume.
    pub fn channel(&self, c: usize) -> Result<Volume> {
        if c >= self.nc() {
            return Err(Error::invalid(
                "channel",
                format!("channel {c} out of bounds for C={}", self.nc()),
            ));
        }
        let [nx, ny, nt, _] = self.dims;
        Ok(Volume::from_fn([nx, ny, nt, 1], |x, y, t, _| {
            self.get(x, y, t, c)
        }))
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if let Some((index, &value)) = self.data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(())
    }
}

/// A set of `K` kernels sharing one receptive-field shape `(n, m, tau, c_in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    kernels: Vec<Volume>,
}

impl FilterBank {
    pub fn new(kernels: Vec<Volume>) -> Result<Self> {
        let first = kernels
            .first()
            .ok_or_else(|| Error::invalid("kernels", "filter bank must hold at least one kernel"))?;
        let shape = first.dims();
        for (i, k) in kernels.iter().enumerate() {
            if k.dims() != shape {
                return Err(Error::ShapeMismatch {
                    expected: format!("kernel shape {shape:?}"),
                    got: format!("kernel {i} has shape {:?}", k.dims()),
                });
            }
            k.check_finite()?;
        }
        Ok(FilterBank { kernels })
    }

    /// Builds a bank of `K` kernels from flat rows, each of length
    /// `n*m*tau*c_in` in x-fastest order.
    pub fn from_rows(shape: [usize; 4], rows: &[Vec<f32>]) -> Result<Self> {
        let kernels = rows
            .iter()
            .map(|r| Volume::from_vec(shape, r.clone()))
            .collect::<Result<Vec<_>>>()?;
        FilterBank::new(kernels)
    }

    #[inline]
    pub fn num_filters(&self) -> usize {
        self.kernels.len()
    }

    /// Kernel receptive-field shape `(n, m, tau, c_in)`.
    #[inline]
    pub fn kernel_shape(&self) -> [usize; 4] {
        self.kernels[0].dims()
    }

    #[inline]
    pub fn c_in(&self) -> usize {
        self.kernel_shape()[3]
    }

    pub fn kernels(&self) -> &[Volume] {
        &self.kernels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_zero_dim() {
        assert!(Volume::from_vec([0, 1, 1, 1], vec![]).is_err());
    }

    #[test]
    fn from_vec_rejects_length_mismatch() {
        assert!(Volume::from_vec([2, 2, 1, 1], vec![1.0; 3]).is_err());
    }

    #[test]
    fn from_vec_rejects_nan() {
        let err = Volume::from_vec([2, 1, 1, 1], vec![1.0, f32::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1, .. }));
    }

    #[test]
    fn layout_is_x_fastest() {
        let v = Volume::from_vec([2, 2, 1, 2], (0..8).map(|i| i as f32).collect()).unwrap();
        assert_eq!(v.get(0, 0, 0, 0), 0.0);
        assert_eq!(v.get(1, 0, 0, 0), 1.0);
        assert_eq!(v.get(0, 1, 0, 0), 2.0);
        assert_eq!(v.get(0, 0, 0, 1), 4.0);
    }

    #[test]
    fn filter_bank_rejects_mixed_shapes() {
        let a = Volume::zeros([2, 2, 1, 1]);
        let b = Volume::zeros([3, 3, 1, 1]);
        assert!(FilterBank::new(vec![a, b]).is_err());
    }
}
