//! PCA fitting on sample matrices.

use super::linalg::{sym_eigen_desc, Mat};
use super::PcaModel;
use crate::error::{Error, Result};

/// Mean-centered eigendecomposition of the sample covariance, keeping the
/// top `m` principal directions.
///
/// The whitening regularizer is `eps_whiten = 1e-5 * lambda_1`; when the
/// m-th eigenvalue falls below it the model is flagged rank-deficient and
/// projection proceeds with regularization.
pub fn fit_pca(rows: &[Vec<f32>], m: usize, whiten: bool) -> Result<PcaModel> {
    let t = rows.len();
    if m == 0 {
        return Err(Error::invalid("m", "component count must be >= 1"));
    }
    if t < m {
        return Err(Error::invalid(
            "data",
            format!("need at least m={m} samples, got {t}"),
        ));
    }
    let n = rows[0].len();
    if n < m {
        return Err(Error::invalid(
            "m",
            format!("component count {m} exceeds input dim {n}"),
        ));
    }

    let mut mean = vec![0.0f64; n];
    for row in rows {
        if row.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("row length {n}"),
                got: format!("{}", row.len()),
            });
        }
        for (mu, &v) in mean.iter_mut().zip(row.iter()) {
            *mu += v as f64;
        }
    }
    for mu in &mut mean {
        *mu /= t as f64;
    }

    // upper triangle of the sample covariance, then mirrored
    let mut cov = Mat::zeros(n, n);
    let mut centered = vec![0.0f64; n];
    for row in rows {
        for ((c, &v), &mu) in centered.iter_mut().zip(row.iter()).zip(mean.iter()) {
            *c = v as f64 - mu;
        }
        for i in 0..n {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let dst = cov.row_mut(i);
            for (j, &cj) in centered.iter().enumerate().skip(i) {
                dst[j] += ci * cj;
            }
        }
    }
    let norm = 1.0 / t as f64;
    for i in 0..n {
        for j in i..n {
            let v = cov.get(i, j) * norm;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }

    let (values, vectors) = sym_eigen_desc(&cov)?;
    let lambda1 = values[0].max(0.0);
    let eps_whiten = 1e-5 * lambda1;

    let mut components = Mat::zeros(m, n);
    let mut eigenvalues = Vec::with_capacity(m);
    for (r, &value) in values.iter().take(m).enumerate() {
        eigenvalues.push(value.max(0.0));
        components.row_mut(r).copy_from_slice(vectors.row(r));
    }
    let rank_deficient = eigenvalues[m - 1] < eps_whiten;

    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        whiten,
        eps_whiten,
        rank_deficient,
    })
}
