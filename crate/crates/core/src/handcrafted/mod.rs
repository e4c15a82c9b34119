//! The IDT descriptor family (HOG/HOF/MBH + BoW encoding) expressed as
//! convolution-pooling cascades.
//!
//! Gradients are a two-kernel convolution, oriented soft binning is a bank
//! of unit direction vectors under relu, and cell histograms are one local
//! sum pooling. The HOF zero-motion bin is the single piece that does not
//! fit a linear conv layer: it gates all channels on flow magnitude, and is
//! applied between the binning convolution and the pooling (see
//! [`oriented_binning`]).

pub mod fmt;

pub use fmt::{read_cdsc_file, write_cdsc_file, CDSC_MAGIC};

use crate::error::{Error, Result};
use crate::tensor::{
    apply_nonlinearity, cascade_eval, conv3d, local_pool, CascadeSpec, FilterBank, Layer,
    LocalPoolKind, Nonlinearity, Padding, Volume,
};
use crate::video::Trajectory;

/// Descriptor family tag carried through files and encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Hog,
    Hof,
    Mbhx,
    Mbhy,
    Trajectory,
    Lop,
    Lof,
}

impl DescriptorKind {
    pub fn tag(self) -> u32 {
        match self {
            DescriptorKind::Hog => 0,
            DescriptorKind::Hof => 1,
            DescriptorKind::Mbhx => 2,
            DescriptorKind::Mbhy => 3,
            DescriptorKind::Trajectory => 4,
            DescriptorKind::Lop => 5,
            DescriptorKind::Lof => 6,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        Some(match tag {
            0 => DescriptorKind::Hog,
            1 => DescriptorKind::Hof,
            2 => DescriptorKind::Mbhx,
            3 => DescriptorKind::Mbhy,
            4 => DescriptorKind::Trajectory,
            5 => DescriptorKind::Lop,
            6 => DescriptorKind::Lof,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Hog => "hog",
            DescriptorKind::Hof => "hof",
            DescriptorKind::Mbhx => "mbhx",
            DescriptorKind::Mbhy => "mbhy",
            DescriptorKind::Trajectory => "traj",
            DescriptorKind::Lop => "lop",
            DescriptorKind::Lof => "lof",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "hog" => DescriptorKind::Hog,
            "hof" => DescriptorKind::Hof,
            "mbhx" => DescriptorKind::Mbhx,
            "mbhy" => DescriptorKind::Mbhy,
            "traj" | "trajectory" => DescriptorKind::Trajectory,
            "lop" => DescriptorKind::Lop,
            "lof" => DescriptorKind::Lof,
            _ => return None,
        })
    }
}

/// One descriptor row: values plus the normalized space-time location of
/// the trajectory it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct IdtDescriptor {
    pub values: Vec<f32>,
    pub kind: DescriptorKind,
    pub location: [f32; 3],
}

impl IdtDescriptor {
    pub fn new(values: Vec<f32>, kind: DescriptorKind, location: [f32; 3]) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("values", format!("non-finite descriptor value {v}")));
        }
        if location.iter().any(|&l| !(0.0..=1.0).contains(&l)) {
            return Err(Error::invalid(
                "location",
                format!("location {location:?} outside the unit cube"),
            ));
        }
        Ok(IdtDescriptor {
            values,
            kind,
            location,
        })
    }
}

/// Unit direction vectors for oriented soft binning, optionally with a
/// zero-motion bin gated on sample magnitude.
#[derive(Debug, Clone)]
pub struct BinningBank {
    directions: Vec<[f32; 2]>,
    zero_bin_threshold: Option<f32>,
}

impl BinningBank {
    /// `k` directions evenly spaced over 2*pi starting at angle zero.
    pub fn evenly_spaced(k: usize, zero_bin_threshold: Option<f32>) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("k", "need at least 2 directions"));
        }
        let directions = (0..k)
            .map(|i| {
                let theta = std::f64::consts::TAU * i as f64 / k as f64;
                [theta.cos() as f32, theta.sin() as f32]
            })
            .collect();
        Ok(BinningBank {
            directions,
            zero_bin_threshold,
        })
    }

    pub fn directions(&self) -> &[[f32; 2]] {
        &self.directions
    }

    pub fn zero_bin_threshold(&self) -> Option<f32> {
        self.zero_bin_threshold
    }

    /// Output channels: one per direction, plus the zero bin when present.
    pub fn num_bins(&self) -> usize {
        self.directions.len() + usize::from(self.zero_bin_threshold.is_some())
    }

    /// The linear part as a 1x1x1 conv bank over (gx, gy). The zero bin, if
    /// any, appears as an all-zero kernel whose response is filled in by
    /// [`oriented_binning`].
    pub fn to_filter_bank(&self) -> FilterBank {
        let mut rows: Vec<Vec<f32>> = self
            .directions
            .iter()
            .map(|d| vec![d[0], d[1]])
            .collect();
        if self.zero_bin_threshold.is_some() {
            rows.push(vec![0.0, 0.0]);
        }
        FilterBank::from_rows([1, 1, 1, 2], &rows).expect("static bank shape")
    }
}

/// Two centered-difference kernels (3x3x1), responding along x and y.
pub fn gradient_filters() -> FilterBank {
    let mut gx = Volume::zeros([3, 3, 1, 1]);
    gx.set(0, 1, 0, 0, -1.0);
    gx.set(2, 1, 0, 0, 1.0);
    let mut gy = Volume::zeros([3, 3, 1, 1]);
    gy.set(1, 0, 0, 0, -1.0);
    gy.set(1, 2, 0, 0, 1.0);
    FilterBank::new(vec![gx, gy]).expect("static kernels")
}

/// Soft binning of a 2-channel (gx, gy) field: channel `k` responds with
/// `relu(gx*cos + gy*sin)`. With a zero bin, sites whose magnitude falls
/// below the threshold respond 1 in the zero channel and 0 elsewhere.
pub fn oriented_binning(gradients: &Volume, bank: &BinningBank) -> Result<Volume> {
    if gradients.nc() != 2 {
        return Err(Error::ChannelMismatch {
            input: gradients.nc(),
            expected: 2,
        });
    }
    let conv = conv3d(gradients, &bank.to_filter_bank(), Padding::Valid)?;
    let mut out = apply_nonlinearity(&conv, Nonlinearity::Relu)?;
    if let Some(threshold) = bank.zero_bin_threshold {
        let k = bank.directions.len();
        let [nx, ny, nt, _] = out.dims();
        for t in 0..nt {
            for y in 0..ny {
                for x in 0..nx {
                    let gx = gradients.get(x, y, t, 0);
                    let gy = gradients.get(x, y, t, 1);
                    if (gx * gx + gy * gy).sqrt() < threshold {
                        for c in 0..k {
                            out.set(x, y, t, c, 0.0);
                        }
                        out.set(x, y, t, k, 1.0);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Geometry of the descriptor nets for one trajectory-aligned patch.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdtNetConfig {
    /// Spatial patch side in pixels.
    pub patch_size: usize,
    /// Temporal patch length in frames.
    pub patch_len: usize,
    /// Cells per axis (x, y, t) for the local sum pooling.
    pub cell_grid: (usize, usize, usize),
    /// Direction bins for HOG/MBH.
    pub num_bins: usize,
    /// Direction bins for HOF, excluding the zero bin.
    pub hof_bins: usize,
    /// Flow magnitude below which the HOF zero bin fires, px/frame.
    pub zero_bin_threshold: f32,
}

impl Default for IdtNetConfig {
    fn default() -> Self {
        IdtNetConfig {
            patch_size: 32,
            patch_len: 15,
            cell_grid: (2, 2, 3),
            num_bins: 8,
            hof_bins: 8,
            zero_bin_threshold: 0.4,
        }
    }
}

impl IdtNetConfig {
    /// Pool window per cell for nets whose binning sees the full patch.
    pub fn pool_size(&self) -> (usize, usize, usize) {
        (
            (self.patch_size / self.cell_grid.0).max(1),
            (self.patch_size / self.cell_grid.1).max(1),
            (self.patch_len / self.cell_grid.2).max(1),
        )
    }

    /// Pool window per cell after the valid gradient convolution shrank the
    /// spatial dims by 2.
    pub fn gradient_pool_size(&self) -> (usize, usize, usize) {
        (
            ((self.patch_size - 2) / self.cell_grid.0).max(1),
            ((self.patch_size - 2) / self.cell_grid.1).max(1),
            (self.patch_len / self.cell_grid.2).max(1),
        )
    }

    pub fn num_cells(&self) -> usize {
        self.cell_grid.0 * self.cell_grid.1 * self.cell_grid.2
    }

    pub fn hog_dim(&self) -> usize {
        self.num_cells() * self.num_bins
    }

    pub fn hof_dim(&self) -> usize {
        self.num_cells() * (self.hof_bins + 1)
    }

    pub fn mbh_dim(&self) -> usize {
        self.num_cells() * self.num_bins
    }
}

/// HOG net: gradient convolution, oriented binning, one spatio-temporal sum
/// pooling over the cell grid.
///
/// The gradient stage uses valid padding: zero-padded borders would invent
/// gradients on constant inputs, and the descriptor of a constant patch
/// must be exactly zero.
pub fn hog_net(cfg: &IdtNetConfig) -> Result<CascadeSpec> {
    let bank = BinningBank::evenly_spaced(cfg.num_bins, None)?;
    CascadeSpec::new(vec![
        Layer::Conv {
            bank: gradient_filters(),
            nonlinearity: Nonlinearity::Identity,
            padding: Padding::Valid,
        },
        Layer::Conv {
            bank: bank.to_filter_bank(),
            nonlinearity: Nonlinearity::Relu,
            padding: Padding::Valid,
        },
        Layer::Pool {
            kind: LocalPoolKind::Sum,
            size: cfg.gradient_pool_size(),
        },
    ])
}

/// HOF net: oriented binning of flow directly (no gradient stage), then the
/// cell pooling. The zero bin rides along as an extra channel; its gating
/// is not a conv layer and is applied by [`hof_descriptor`] between the
/// binning and the pooling.
pub fn hof_net(cfg: &IdtNetConfig) -> Result<CascadeSpec> {
    let bank = BinningBank::evenly_spaced(cfg.hof_bins, Some(cfg.zero_bin_threshold))?;
    CascadeSpec::new(vec![
        Layer::Conv {
            bank: bank.to_filter_bank(),
            nonlinearity: Nonlinearity::Relu,
            padding: Padding::Valid,
        },
        Layer::Pool {
            kind: LocalPoolKind::Sum,
            size: cfg.pool_size(),
        },
    ])
}

/// MBH net for one flow component: gradient convolution on the single
/// channel (valid padding, as in the HOG net), oriented binning, cell
/// pooling.
pub fn mbh_net(cfg: &IdtNetConfig) -> Result<CascadeSpec> {
    let bank = BinningBank::evenly_spaced(cfg.num_bins, None)?;
    CascadeSpec::new(vec![
        Layer::Conv {
            bank: gradient_filters(),
            nonlinearity: Nonlinearity::Identity,
            padding: Padding::Valid,
        },
        Layer::Conv {
            bank: bank.to_filter_bank(),
            nonlinearity: Nonlinearity::Relu,
            padding: Padding::Valid,
        },
        Layer::Pool {
            kind: LocalPoolKind::Sum,
            size: cfg.gradient_pool_size(),
        },
    ])
}

fn flatten_cells(pooled: &Volume) -> Vec<f32> {
    let [nx, ny, nt, nc] = pooled.dims();
    let mut out = Vec::with_capacity(nx * ny * nt * nc);
    for t in 0..nt {
        for y in 0..ny {
            for x in 0..nx {
                for c in 0..nc {
                    out.push(pooled.get(x, y, t, c));
                }
            }
        }
    }
    out
}

/// HOG descriptor of a single-channel pixel patch.
pub fn hog_descriptor(patch: &Volume, cfg: &IdtNetConfig) -> Result<Vec<f32>> {
    if patch.nc() != 1 {
        return Err(Error::ChannelMismatch {
            input: patch.nc(),
            expected: 1,
        });
    }
    let pooled = cascade_eval(&hog_net(cfg)?, patch)?.into_volume()?;
    Ok(flatten_cells(&pooled))
}

/// HOF descriptor of a 2-channel flow patch, zero bin included.
pub fn hof_descriptor(flow_patch: &Volume, cfg: &IdtNetConfig) -> Result<Vec<f32>> {
    let bank = BinningBank::evenly_spaced(cfg.hof_bins, Some(cfg.zero_bin_threshold))?;
    let binned = oriented_binning(flow_patch, &bank)?;
    let pooled = local_pool(&binned, LocalPoolKind::Sum, cfg.pool_size())?;
    Ok(flatten_cells(&pooled))
}

/// MBHx and MBHy descriptors: the MBH net applied to each flow component.
pub fn mbh_descriptors(flow_patch: &Volume, cfg: &IdtNetConfig) -> Result<(Vec<f32>, Vec<f32>)> {
    if flow_patch.nc() != 2 {
        return Err(Error::ChannelMismatch {
            input: flow_patch.nc(),
            expected: 2,
        });
    }
    let net = mbh_net(cfg)?;
    let x = cascade_eval(&net, &flow_patch.channel(0)?)?.into_volume()?;
    let y = cascade_eval(&net, &flow_patch.channel(1)?)?.into_volume()?;
    Ok((flatten_cells(&x), flatten_cells(&y)))
}

/// Trajectory shape descriptor: concatenated frame-to-frame displacements,
/// l1-normalized by the total displacement magnitude. Static trajectories
/// are degenerate and rejected; callers filter them.
pub fn trajectory_descriptor(traj: &Trajectory, clip_dims: [usize; 3]) -> Result<IdtDescriptor> {
    let points = &traj.points;
    if points.len() < 2 {
        return Err(Error::invalid(
            "trajectory",
            format!("need at least 2 points, got {}", points.len()),
        ));
    }
    let mut displacements = Vec::with_capacity(2 * (points.len() - 1));
    let mut total = 0.0f64;
    for pair in points.windows(2) {
        let dx = pair[1].0 - pair[0].0;
        let dy = pair[1].1 - pair[0].1;
        displacements.push(dx);
        displacements.push(dy);
        total += ((dx * dx + dy * dy) as f64).sqrt();
    }
    if total <= f64::EPSILON {
        return Err(Error::Degenerate(
            "static trajectory has zero total displacement".into(),
        ));
    }
    for d in &mut displacements {
        *d = (*d as f64 / total) as f32;
    }
    let location = traj.normalized_location(clip_dims);
    IdtDescriptor::new(displacements, DescriptorKind::Trajectory, location)
}

/// BoW encoding cascade: centroid scoring as a 1x1x1 convolution over the
/// constant-augmented descriptor stream, softmax across the K channels,
/// global sum pooling.
///
/// Scores are `-||x - c_k||^2 / (2 sigma^2)` with sigma the median pairwise
/// centroid distance; the `-||x||^2` term is constant per site and drops
/// out of the softmax, so the score is exactly a dot product with the
/// augmented kernel `[c_k, -||c_k||^2/2] / sigma^2` over inputs `[x, 1]`.
pub fn kmeans_bow_cascade(centroids: &[Vec<f32>]) -> Result<CascadeSpec> {
    let k = centroids.len();
    if k == 0 {
        return Err(Error::invalid("centroids", "need at least one centroid"));
    }
    let dim = centroids[0].len();
    let sigma2 = {
        let mut dists = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                let d2: f64 = centroids[i]
                    .iter()
                    .zip(centroids[j].iter())
                    .map(|(a, b)| ((a - b) as f64).powi(2))
                    .sum();
                dists.push(d2.sqrt());
            }
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if dists.is_empty() {
            1.0
        } else {
            dists[dists.len() / 2]
        };
        let sigma = if median > 0.0 { median } else { 1.0 };
        sigma * sigma
    };

    let rows: Vec<Vec<f32>> = centroids
        .iter()
        .map(|c| {
            if c.len() != dim {
                return Err(Error::ShapeMismatch {
                    expected: format!("centroid dim {dim}"),
                    got: format!("{}", c.len()),
                });
            }
            let norm2: f64 = c.iter().map(|&v| (v as f64) * (v as f64)).sum();
            let mut row: Vec<f32> = c.iter().map(|&v| (v as f64 / sigma2) as f32).collect();
            row.push((-norm2 / (2.0 * sigma2)) as f32);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let bank = FilterBank::from_rows([1, 1, 1, dim + 1], &rows)?;
    CascadeSpec::new(vec![
        Layer::Conv {
            bank,
            nonlinearity: Nonlinearity::Softmax,
            padding: Padding::Valid,
        },
        Layer::GlobalSumPool,
    ])
}

/// Runs the BoW cascade over a descriptor set: returns the K-bin soft
/// histogram, which sums to the number of descriptors.
pub fn bow_encode(descriptors: &[Vec<f32>], centroids: &[Vec<f32>]) -> Result<Vec<f32>> {
    let spec = kmeans_bow_cascade(centroids)?;
    let n = descriptors.len();
    if n == 0 {
        return Err(Error::invalid("descriptors", "nothing to encode"));
    }
    let dim = centroids[0].len();
    let mut stream = Volume::zeros([1, 1, n, dim + 1]);
    for (t, d) in descriptors.iter().enumerate() {
        if d.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: format!("descriptor dim {dim}"),
                got: format!("descriptor {t} has dim {}", d.len()),
            });
        }
        for (c, &v) in d.iter().enumerate() {
            stream.set(0, 0, t, c, v);
        }
        stream.set(0, 0, t, dim, 1.0);
    }
    cascade_eval(&spec, &stream)?.into_vector()
}
