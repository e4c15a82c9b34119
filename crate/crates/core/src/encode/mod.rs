//! Codebook and GMM learning, Fisher-vector encoding, the normalization
//! chain, linear SVM classification and evaluation metrics.

mod fisher;
pub mod fmt;
mod gmm;
mod kmeans;
mod svm;

pub use fisher::{
    augment_location, fisher_vector, fisher_vector_with_weight_block, l2_normalize,
    power_normalize, reduce_pca_half,
};
pub use fmt::{
    read_cgmm_file, read_ckms_file, read_cmat_file, read_csvm_file, write_cgmm_file,
    write_ckms_file, write_cmat_file, write_csvm_file,
};
pub use gmm::{fit_gmm, GmmTrainOpts};
pub use kmeans::{fit_kmeans, KmeansResult};
pub use svm::{mean_accuracy, predict, train_svm, SvmTrainOpts};

use crate::error::{Error, Result};
use crate::handcrafted::DescriptorKind;

/// BoW soft histogram scaled to a distribution (sums to 1), so clip length
/// does not dominate the representation.
pub fn bow_histogram_normalized(rows: &[Vec<f32>], centroids: &[Vec<f32>]) -> Result<Vec<f32>> {
    let hist = crate::handcrafted::bow_encode(rows, centroids)?;
    let n = rows.len() as f32;
    Ok(hist.iter().map(|&h| h / n).collect())
}

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone)]
pub struct GmmModel {
    /// Mixture weights on the simplex.
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Per-dimension variances, floored at `var_floor`.
    pub variances: Vec<Vec<f64>>,
    pub var_floor: f64,
    pub log_likelihood_history: Vec<f64>,
}

impl GmmModel {
    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map(|m| m.len()).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.means.len() != k || self.variances.len() != k {
            return Err(Error::invalid("gmm", "weights/means/variances sizes disagree"));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-8 {
            return Err(Error::invalid("gmm", format!("weights sum to {sum}, not 1")));
        }
        for vs in &self.variances {
            if vs.iter().any(|&v| v < self.var_floor || !v.is_finite()) {
                return Err(Error::invalid("gmm", "variance below floor"));
            }
        }
        Ok(())
    }
}

/// One-vs-all linear separators with a shared regularization constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// Sorted class ids, one binary model each.
    pub classes: Vec<u32>,
    /// Per-class weight vector.
    pub weights: Vec<Vec<f64>>,
    /// Per-class bias.
    pub biases: Vec<f64>,
    pub c: f64,
    /// Value of the appended bias feature used at train and predict time.
    pub bias_scale: f64,
    /// Primal objective (hinge + regularizer) per class per epoch.
    pub objective_history: Vec<Vec<f64>>,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.weights.first().map(|w| w.len()).unwrap_or(0)
    }
}

/// Final video representation plus the descriptor kinds that fed it.
#[derive(Debug, Clone)]
pub struct EncodedVideo {
    pub vector: Vec<f32>,
    pub provenance: Vec<DescriptorKind>,
}

impl EncodedVideo {
    /// Builds the final representation from per-kind encodings: every block
    /// is power- then l2-normalized, the blocks are concatenated, and the
    /// concatenation is l2-normalized so the stored vector has unit norm.
    pub fn from_blocks(blocks: Vec<(DescriptorKind, Vec<f32>)>, alpha: f32) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("blocks", "nothing to concatenate"));
        }
        let mut vector = Vec::new();
        let mut provenance = Vec::new();
        for (kind, block) in blocks {
            let normalized = l2_normalize(&power_normalize(&block, alpha));
            vector.extend(normalized);
            provenance.push(kind);
        }
        let vector = l2_normalize(&vector);
        Ok(EncodedVideo { vector, provenance })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoded_video_has_unit_norm() {
        let blocks = vec![
            (DescriptorKind::Hog, vec![1.0, 2.0, 3.0]),
            (DescriptorKind::Lof, vec![-4.0, 0.5]),
        ];
        let enc = EncodedVideo::from_blocks(blocks, 0.5).unwrap();
        let norm: f32 = enc.vector.iter().map(|v| v * v).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        assert_eq!(enc.provenance, vec![DescriptorKind::Hog, DescriptorKind::Lof]);
    }
}
