//! PCA whitening, independent subspace analysis under the orthogonality
//! constraint, and the ISA+ fusion of both.
//!
//! The learned model is a projection matrix `W` with orthonormal rows
//! (`W W^T = I`) followed by a fixed grouping: the activation of output
//! unit `i` is the l2 norm of the group of projected coordinates assigned
//! to it. Training minimizes the summed group norms over the whitened
//! training set, which is exactly the group l1-norm of `W x`, so sparse
//! group activations fall out of a plain projected gradient descent.

pub mod fmt;
pub mod linalg;
mod pca;
mod train;
pub mod viz;

pub use fmt::{
    read_cisa_file, read_cpca_file, write_cisa_file, write_cpca_file, CISA_MAGIC, CPCA_MAGIC,
};
pub use pca::fit_pca;
pub use train::{
    group_l1_norm, isa_activation, isa_gradient, isa_objective, isa_plus_extract, orthonormalize,
    reconstruct, train_isa,
};

use crate::error::{Error, Result};
use linalg::Mat;

/// PCA model: mean, principal directions (rows, descending eigenvalue
/// order), eigenvalues, and optional whitening.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Mat,
    pub eigenvalues: Vec<f64>,
    pub whiten: bool,
    pub eps_whiten: f64,
    /// Set when the smallest kept eigenvalue fell below the whitening
    /// regularizer; projection proceeds with regularization.
    pub rank_deficient: bool,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.components.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.components.rows()
    }

    /// Projects one raw sample: `y = S C (x - mean)` where `S` is
    /// `diag(1/sqrt(lambda + eps))` when whitening, identity otherwise.
    pub fn project(&self, x: &[f32]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("input dim {}", self.input_dim()),
                got: format!("{}", x.len()),
            });
        }
        let centered: Vec<f64> = x
            .iter()
            .zip(self.mean.iter())
            .map(|(&v, &m)| v as f64 - m)
            .collect();
        let mut y = self.components.matvec(&centered);
        if self.whiten {
            for (v, &lambda) in y.iter_mut().zip(self.eigenvalues.iter()) {
                *v /= (lambda + self.eps_whiten).sqrt();
            }
        }
        Ok(y)
    }

    /// Back-projects an unwhitened projection: `mean + C^T y`.
    pub fn reconstruct_unwhitened(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.components.transpose_matvec(y);
        for (v, &m) in x.iter_mut().zip(self.mean.iter()) {
            *v += m;
        }
        x
    }

    /// Rows of the end-to-end linear map raw -> projection, i.e. the
    /// (whitened) components; used to pull learned filters back to raw
    /// sample space for visualization.
    pub fn projection_matrix(&self) -> Mat {
        let mut p = self.components.clone();
        if self.whiten {
            for r in 0..p.rows() {
                let s = 1.0 / (self.eigenvalues[r] + self.eps_whiten).sqrt();
                for v in p.row_mut(r) {
                    *v *= s;
                }
            }
        }
        p
    }
}

/// Non-overlapping partition of `1..m` into `d` groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    groups: Vec<Vec<usize>>,
    m: usize,
}

impl Grouping {
    /// Validates that `groups` partition `0..m`: every index exactly once.
    pub fn new(groups: Vec<Vec<usize>>, m: usize) -> Result<Self> {
        let mut seen = vec![false; m];
        for (gi, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::invalid("groups", format!("group {gi} is empty")));
            }
            for &j in group {
                if j >= m {
                    return Err(Error::invalid(
                        "groups",
                        format!("index {j} out of range for m={m}"),
                    ));
                }
                if seen[j] {
                    return Err(Error::invalid(
                        "groups",
                        format!("index {j} appears in more than one group"),
                    ));
                }
                seen[j] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::invalid(
                "groups",
                format!("index {missing} is not covered by any group"),
            ));
        }
        Ok(Grouping { groups, m })
    }

    /// Contiguous block partition: group `i` covers
    /// `i*group_size..(i+1)*group_size`.
    pub fn contiguous(num_groups: usize, group_size: usize) -> Self {
        let groups = (0..num_groups)
            .map(|i| (i * group_size..(i + 1) * group_size).collect())
            .collect();
        Grouping {
            groups,
            m: num_groups * group_size,
        }
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.m
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Group index of each latent unit.
    pub fn group_of(&self) -> Vec<usize> {
        let mut g = vec![0usize; self.m];
        for (gi, group) in self.groups.iter().enumerate() {
            for &j in group {
                g[j] = gi;
            }
        }
        g
    }
}

/// Trained ISA model: projection `W` (orthonormal rows), grouping, the
/// attached whitening PCA, and the smoothing constant.
#[derive(Debug, Clone)]
pub struct IsaModel {
    pub w: Mat,
    pub grouping: Grouping,
    pub pca: PcaModel,
    pub eps: f64,
    pub objective_history: Vec<f64>,
}

impl IsaModel {
    /// Whitened input dimension `n` (columns of `W`).
    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    /// Latent dimension `m` (rows of `W`).
    pub fn latent_dim(&self) -> usize {
        self.w.rows()
    }

    /// Output dimension `d` (number of groups).
    pub fn output_dim(&self) -> usize {
        self.grouping.num_groups()
    }

    /// Raw input dimension expected before PCA.
    pub fn raw_dim(&self) -> usize {
        self.pca.input_dim()
    }
}

/// Training configuration. `latent_dim = out_dim * group_size` is enforced.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsaTrainConfig {
    pub group_size: usize,
    pub out_dim: usize,
    /// PCA dimension `n` fed to `W`; defaults to the latent dimension,
    /// which makes `W` square.
    pub pca_dim: Option<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    /// 0 means full batch.
    pub batch_size: usize,
    pub eps: f64,
    pub seed: u64,
}

impl Default for IsaTrainConfig {
    fn default() -> Self {
        IsaTrainConfig {
            group_size: 10,
            out_dim: 8,
            pca_dim: None,
            learning_rate: 0.5,
            epochs: 500,
            batch_size: 0,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl IsaTrainConfig {
    pub fn latent_dim(&self) -> usize {
        self.out_dim * self.group_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.group_size == 0 || self.out_dim == 0 {
            return Err(Error::invalid("isa", "group_size and out_dim must be positive"));
        }
        if self.learning_rate <= 0.0 || self.epochs == 0 {
            return Err(Error::invalid("isa", "learning_rate and epochs must be positive"));
        }
        if self.eps <= 0.0 {
            return Err(Error::invalid("isa", "eps must be positive"));
        }
        if let Some(n) = self.pca_dim {
            if n < self.latent_dim() {
                return Err(Error::invalid(
                    "isa",
                    format!("pca_dim {n} must be >= latent dim {}", self.latent_dim()),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contiguous_grouping_partitions() {
        let g = Grouping::contiguous(3, 4);
        assert_eq!(g.num_groups(), 3);
        assert_eq!(g.latent_dim(), 12);
        assert_eq!(g.group_of()[5], 1);
    }

    #[test]
    fn grouping_rejects_overlap_and_gap() {
        assert!(Grouping::new(vec![vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(Grouping::new(vec![vec![0], vec![2]], 3).is_err());
        assert!(Grouping::new(vec![vec![0, 2], vec![1]], 3).is_ok());
    }

    #[test]
    fn config_validates_pca_dim() {
        let cfg = IsaTrainConfig {
            group_size: 2,
            out_dim: 2,
            pca_dim: Some(3),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
