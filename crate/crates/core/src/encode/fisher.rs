//! Fisher-vector encoding, location augmentation, PCA halving, and the
//! power / l2 normalization pair.

use super::gmm::posteriors;
use super::GmmModel;
use crate::error::{Error, Result};
use crate::handcrafted::IdtDescriptor;
use crate::isa::PcaModel;

/// Fisher vector of a descriptor set: normalized gradients of the GMM
/// log-likelihood with respect to means and variances, soft-assigned and
/// averaged over the N descriptors. Layout: K*D mean-gradient entries
/// followed by K*D variance-gradient entries.
pub fn fisher_vector(descriptors: &[Vec<f32>], gmm: &GmmModel) -> Result<Vec<f32>> {
    fisher_vector_with_weight_block(descriptors, gmm, false)
}

/// Fisher vector with an optional leading weight-gradient block of K
/// entries appended after the variance block.
pub fn fisher_vector_with_weight_block(
    descriptors: &[Vec<f32>],
    gmm: &GmmModel,
    include_weights: bool,
) -> Result<Vec<f32>> {
    let n = descriptors.len();
    if n == 0 {
        return Err(Error::invalid("descriptors", "need at least one descriptor"));
    }
    let k = gmm.num_components();
    let d = gmm.dim();
    for (i, row) in descriptors.iter().enumerate() {
        if row.len() != d {
            return Err(Error::ShapeMismatch {
                expected: format!("descriptor dim {d}"),
                got: format!("descriptor {i} has dim {}", row.len()),
            });
        }
    }

    let mut mean_grad = vec![0.0f64; k * d];
    let mut var_grad = vec![0.0f64; k * d];
    let mut weight_grad = vec![0.0f64; k];
    let mut post = vec![0.0f64; k];
    for x in descriptors {
        posteriors(gmm, x, &mut post);
        for (c, wg) in weight_grad.iter_mut().enumerate() {
            let g = post[c];
            *wg += g - gmm.weights[c];
            if g == 0.0 {
                continue;
            }
            let mu = &gmm.means[c];
            let var = &gmm.variances[c];
            for j in 0..d {
                let z = (x[j] as f64 - mu[j]) / var[j].sqrt();
                mean_grad[c * d + j] += g * z;
                var_grad[c * d + j] += g * (z * z - 1.0);
            }
        }
    }

    let nf = n as f64;
    let mut out = Vec::with_capacity(2 * k * d + if include_weights { k } else { 0 });
    for c in 0..k {
        let scale = 1.0 / (nf * gmm.weights[c].sqrt());
        for j in 0..d {
            out.push((mean_grad[c * d + j] * scale) as f32);
        }
    }
    for c in 0..k {
        let scale = 1.0 / (nf * (2.0 * gmm.weights[c]).sqrt());
        for j in 0..d {
            out.push((var_grad[c * d + j] * scale) as f32);
        }
    }
    if include_weights {
        for (wg, weight) in weight_grad.iter().zip(gmm.weights.iter()) {
            out.push((wg / (nf * weight.sqrt())) as f32);
        }
    }
    Ok(out)
}

/// Appends the normalized space-time location to the descriptor values.
/// Applied before codebook/GMM fitting and before encoding, so both sides
/// see the same dimensionality.
pub fn augment_location(desc: &IdtDescriptor) -> Vec<f32> {
    let mut out = Vec::with_capacity(desc.values.len() + 3);
    out.extend_from_slice(&desc.values);
    out.extend_from_slice(&desc.location);
    out
}

/// Projects descriptors through a PCA fit with half their dimensionality.
pub fn reduce_pca_half(descriptors: &[Vec<f32>], pca: &PcaModel) -> Result<Vec<Vec<f32>>> {
    let expected_out = pca.input_dim() / 2;
    if pca.output_dim() != expected_out {
        return Err(Error::invalid(
            "pca",
            format!(
                "expected a half-dimension PCA ({} -> {}), got {} -> {}",
                pca.input_dim(),
                expected_out,
                pca.input_dim(),
                pca.output_dim()
            ),
        ));
    }
    descriptors
        .iter()
        .map(|row| {
            let y = pca.project(row)?;
            Ok(y.iter().map(|&v| v as f32).collect())
        })
        .collect()
}

/// Signed power normalization: `sign(v) |v|^alpha` per entry.
pub fn power_normalize(v: &[f32], alpha: f32) -> Vec<f32> {
    v.iter()
        .map(|&x| x.signum() * x.abs().powf(alpha))
        .collect()
}

/// Scales to unit l2 norm; the zero vector passes through unchanged.
pub fn l2_normalize(v: &[f32]) -> Vec<f32> {
    let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
    if norm <= 0.0 {
        return v.to_vec();
    }
    v.iter().map(|&x| (x as f64 / norm) as f32).collect()
}
