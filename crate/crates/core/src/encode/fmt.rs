//! Model and matrix containers: CGMM, CSVM, CKMS and the encoded-video
//! matrix CMAT, all tagged little-endian with f32 payloads.

use super::{GmmModel, SvmModel};
use crate::binio::{self, Reader};
use crate::error::{Error, Result};
use std::path::Path;

pub const CGMM_MAGIC: &[u8; 4] = b"CGMM";
pub const CSVM_MAGIC: &[u8; 4] = b"CSVM";
pub const CKMS_MAGIC: &[u8; 4] = b"CKMS";
pub const CMAT_MAGIC: &[u8; 4] = b"CMAT";

pub fn write_cgmm_file(path: &Path, gmm: &GmmModel) -> Result<()> {
    gmm.validate()?;
    let (k, d) = (gmm.num_components(), gmm.dim());
    binio::write_file(path, |w| {
        binio::write_magic(w, CGMM_MAGIC)?;
        binio::write_u32(w, k as u32)?;
        binio::write_u32(w, d as u32)?;
        binio::write_f32(w, gmm.var_floor as f32)?;
        let weights: Vec<f32> = gmm.weights.iter().map(|&v| v as f32).collect();
        binio::write_f32_slice(w, &weights)?;
        for m in &gmm.means {
            let row: Vec<f32> = m.iter().map(|&v| v as f32).collect();
            binio::write_f32_slice(w, &row)?;
        }
        for v in &gmm.variances {
            let row: Vec<f32> = v.iter().map(|&x| x as f32).collect();
            binio::write_f32_slice(w, &row)?;
        }
        Ok(())
    })
}

pub fn read_cgmm_file(path: &Path) -> Result<GmmModel> {
    let bytes = binio::read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    r.expect_magic(CGMM_MAGIC)?;
    let k = r.read_u32("K")? as usize;
    let d = r.read_u32("D")? as usize;
    binio::checked_len(path, &[k as u32, d as u32])?;
    let var_floor = r.read_f32("var_floor")? as f64;
    let weights: Vec<f64> = r.read_f32_vec(k, "weights")?.iter().map(|&v| v as f64).collect();
    let mut means = Vec::with_capacity(k);
    for i in 0..k {
        means.push(
            r.read_f32_vec(d, &format!("mean {i}"))?
                .iter()
                .map(|&v| v as f64)
                .collect(),
        );
    }
    let mut variances = Vec::with_capacity(k);
    for i in 0..k {
        variances.push(
            r.read_f32_vec(d, &format!("variance {i}"))?
                .iter()
                .map(|&v| v as f64)
                .collect(),
        );
    }
    r.expect_end()?;
    // weights may be off the simplex by f32 rounding
    let mut gmm = GmmModel {
        weights,
        means,
        variances,
        var_floor: var_floor as f64 * 0.999,
        log_likelihood_history: Vec::new(),
    };
    let sum: f64 = gmm.weights.iter().sum();
    if sum > 0.0 {
        for w in &mut gmm.weights {
            *w /= sum;
        }
    }
    gmm.validate()?;
    Ok(gmm)
}

pub fn write_ckms_file(path: &Path, centroids: &[Vec<f32>]) -> Result<()> {
    let k = centroids.len();
    if k == 0 {
        return Err(Error::invalid("centroids", "nothing to write"));
    }
    let d = centroids[0].len();
    binio::write_file(path, |w| {
        binio::write_magic(w, CKMS_MAGIC)?;
        binio::write_u32(w, k as u32)?;
        binio::write_u32(w, d as u32)?;
        for c in centroids {
            binio::write_f32_slice(w, c)?;
        }
        Ok(())
    })
}

pub fn read_ckms_file(path: &Path) -> Result<Vec<Vec<f32>>> {
    let bytes = binio::read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    r.expect_magic(CKMS_MAGIC)?;
    let k = r.read_u32("K")? as usize;
    let d = r.read_u32("D")? as usize;
    binio::checked_len(path, &[k as u32, d as u32])?;
    let mut centroids = Vec::with_capacity(k);
    for i in 0..k {
        centroids.push(r.read_f32_vec(d, &format!("centroid {i}"))?);
    }
    r.expect_end()?;
    Ok(centroids)
}

pub fn write_csvm_file(path: &Path, model: &SvmModel) -> Result<()> {
    let dim = model.dim();
    binio::write_file(path, |w| {
        binio::write_magic(w, CSVM_MAGIC)?;
        binio::write_u32(w, model.classes.len() as u32)?;
        binio::write_u32(w, dim as u32)?;
        binio::write_f32(w, model.c as f32)?;
        binio::write_f32(w, model.bias_scale as f32)?;
        for ((class, weights), bias) in model
            .classes
            .iter()
            .zip(model.weights.iter())
            .zip(model.biases.iter())
        {
            binio::write_u32(w, *class)?;
            let row: Vec<f32> = weights.iter().map(|&v| v as f32).collect();
            binio::write_f32_slice(w, &row)?;
            binio::write_f32(w, *bias as f32)?;
        }
        Ok(())
    })
}

pub fn read_csvm_file(path: &Path) -> Result<SvmModel> {
    let bytes = binio::read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    r.expect_magic(CSVM_MAGIC)?;
    let n_classes = r.read_u32("class count")? as usize;
    let dim = r.read_u32("dim")? as usize;
    binio::checked_len(path, &[n_classes as u32, (dim + 2) as u32])?;
    let c = r.read_f32("C")? as f64;
    let bias_scale = r.read_f32("bias scale")? as f64;
    let mut classes = Vec::with_capacity(n_classes);
    let mut weights = Vec::with_capacity(n_classes);
    let mut biases = Vec::with_capacity(n_classes);
    for i in 0..n_classes {
        classes.push(r.read_u32(&format!("class id {i}"))?);
        weights.push(
            r.read_f32_vec(dim, &format!("weights {i}"))?
                .iter()
                .map(|&v| v as f64)
                .collect(),
        );
        biases.push(r.read_f32(&format!("bias {i}"))? as f64);
    }
    r.expect_end()?;
    Ok(SvmModel {
        classes,
        weights,
        biases,
        c,
        bias_scale,
        objective_history: Vec::new(),
    })
}

/// Encoded-video matrix: rows of features plus an i32 label per row
/// (-1 when absent).
pub fn write_cmat_file(path: &Path, rows: &[Vec<f32>], labels: &[Option<u32>]) -> Result<()> {
    if rows.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels", rows.len()),
            got: format!("{}", labels.len()),
        });
    }
    let cols = rows.first().map(|r| r.len()).unwrap_or(0);
    binio::write_file(path, |w| {
        binio::write_magic(w, CMAT_MAGIC)?;
        binio::write_u32(w, rows.len() as u32)?;
        binio::write_u32(w, cols as u32)?;
        for row in rows {
            binio::write_f32_slice(w, row)?;
        }
        for label in labels {
            binio::write_i32(w, label.map(|l| l as i32).unwrap_or(-1))?;
        }
        Ok(())
    })
}

pub type LabeledMatrix = (Vec<Vec<f32>>, Vec<Option<u32>>);

pub fn read_cmat_file(path: &Path) -> Result<LabeledMatrix> {
    let bytes = binio::read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    r.expect_magic(CMAT_MAGIC)?;
    let n = r.read_u32("rows")? as usize;
    let cols = r.read_u32("cols")? as usize;
    binio::checked_len(path, &[n as u32, cols as u32])?;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        rows.push(r.read_f32_vec(cols, &format!("row {i}"))?);
    }
    let labels = r
        .read_i32_vec(n, "labels")?
        .iter()
        .map(|&l| if l < 0 { None } else { Some(l as u32) })
        .collect();
    r.expect_end()?;
    Ok((rows, labels))
}
