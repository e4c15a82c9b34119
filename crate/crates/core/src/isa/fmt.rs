//! CISA model container: magic "CISA", u32 dims (n_raw, n, m, d,
//! group_size), f32 eps, then mean, components, eigenvalues, W and the
//! binary grouping matrix V, all row-major little-endian f32.

use super::linalg::Mat;
use super::{Grouping, IsaModel, PcaModel};
use crate::binio::{self, Reader};
use crate::error::{Error, Result};
use std::path::Path;

pub const CISA_MAGIC: &[u8; 4] = b"CISA";
pub const CPCA_MAGIC: &[u8; 4] = b"CPCA";

/// Standalone PCA container for the descriptor-halving transform: magic
/// "CPCA", u32 (n, m), u32 whiten flag, f32 eps_whiten, then mean,
/// components and eigenvalues as f32.
pub fn write_cpca_file(path: &Path, pca: &PcaModel) -> Result<()> {
    binio::write_file(path, |w| {
        binio::write_magic(w, CPCA_MAGIC)?;
        binio::write_u32(w, pca.input_dim() as u32)?;
        binio::write_u32(w, pca.output_dim() as u32)?;
        binio::write_u32(w, u32::from(pca.whiten))?;
        binio::write_f32(w, pca.eps_whiten as f32)?;
        let mean: Vec<f32> = pca.mean.iter().map(|&v| v as f32).collect();
        binio::write_f32_slice(w, &mean)?;
        let comp: Vec<f32> = pca.components.data().iter().map(|&v| v as f32).collect();
        binio::write_f32_slice(w, &comp)?;
        let eig: Vec<f32> = pca.eigenvalues.iter().map(|&v| v as f32).collect();
        binio::write_f32_slice(w, &eig)
    })
}

pub fn read_cpca_file(path: &Path) -> Result<PcaModel> {
    let bytes = binio::read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    r.expect_magic(CPCA_MAGIC)?;
    let n = r.read_u32("n")? as usize;
    let m = r.read_u32("m")? as usize;
    binio::checked_len(path, &[m as u32, n as u32])?;
    let whiten = r.read_u32("whiten flag")? != 0;
    let eps_whiten = r.read_f32("eps_whiten")? as f64;
    let mean: Vec<f64> = r.read_f32_vec(n, "mean")?.iter().map(|&v| v as f64).collect();
    let comp = r.read_f32_vec(m * n, "components")?;
    let components = Mat::from_vec(m, n, comp.iter().map(|&v| v as f64).collect())?;
    let eigenvalues: Vec<f64> = r
        .read_f32_vec(m, "eigenvalues")?
        .iter()
        .map(|&v| v as f64)
        .collect();
    r.expect_end()?;
    let rank_deficient = eigenvalues.last().copied().unwrap_or(0.0) < eps_whiten;
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        whiten,
        eps_whiten,
        rank_deficient,
    })
}

pub fn write_cisa_file(path: &Path, model: &IsaModel) -> Result<()> {
    let n_raw = model.raw_dim();
    let n = model.input_dim();
    let m = model.latent_dim();
    let d = model.output_dim();
    if !m.is_multiple_of(d) {
        return Err(Error::invalid("model", "irregular group sizes are not serializable"));
    }
    let group_size = m / d;

    binio::write_file(path, |w| {
        binio::write_magic(w, CISA_MAGIC)?;
        for dim in [n_raw, n, m, d, group_size] {
            binio::write_u32(w, dim as u32)?;
        }
        binio::write_f32(w, model.eps as f32)?;
        let mean: Vec<f32> = model.pca.mean.iter().map(|&v| v as f32).collect();
        binio::write_f32_slice(w, &mean)?;
        let comp: Vec<f32> = model.pca.components.data().iter().map(|&v| v as f32).collect();
        binio::write_f32_slice(w, &comp)?;
        let eig: Vec<f32> = model.pca.eigenvalues.iter().map(|&v| v as f32).collect();
        binio::write_f32_slice(w, &eig)?;
        let wm: Vec<f32> = model.w.data().iter().map(|&v| v as f32).collect();
        binio::write_f32_slice(w, &wm)?;
        // V as d x m of 0/1 floats
        let group_of = model.grouping.group_of();
        let mut v = vec![0.0f32; d * m];
        for (j, &g) in group_of.iter().enumerate() {
            v[g * m + j] = 1.0;
        }
        binio::write_f32_slice(w, &v)
    })
}

pub fn read_cisa_file(path: &Path) -> Result<IsaModel> {
    let bytes = binio::read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    r.expect_magic(CISA_MAGIC)?;
    let n_raw = r.read_u32("n_raw")? as usize;
    let n = r.read_u32("n")? as usize;
    let m = r.read_u32("m")? as usize;
    let d = r.read_u32("d")? as usize;
    let group_size = r.read_u32("group_size")? as usize;
    if d * group_size != m {
        return Err(Error::format(
            path,
            format!("inconsistent dims: d={d} * group_size={group_size} != m={m}"),
        ));
    }
    binio::checked_len(path, &[n as u32, n_raw as u32])?;
    let eps = r.read_f32("eps")? as f64;
    let mean: Vec<f64> = r.read_f32_vec(n_raw, "mean")?.iter().map(|&v| v as f64).collect();
    let comp = r.read_f32_vec(n * n_raw, "components")?;
    let components = Mat::from_vec(n, n_raw, comp.iter().map(|&v| v as f64).collect())?;
    let eigenvalues: Vec<f64> = r
        .read_f32_vec(n, "eigenvalues")?
        .iter()
        .map(|&v| v as f64)
        .collect();
    let wdata = r.read_f32_vec(m * n, "W")?;
    let w = Mat::from_vec(m, n, wdata.iter().map(|&v| v as f64).collect())?;
    let vdata = r.read_f32_vec(d * m, "V")?;
    r.expect_end()?;

    let mut groups = vec![Vec::new(); d];
    for j in 0..m {
        let mut owner = None;
        for (i, group) in groups.iter_mut().enumerate() {
            if vdata[i * m + j] != 0.0 {
                if owner.is_some() {
                    return Err(Error::format(path, format!("latent unit {j} is in two groups")));
                }
                owner = Some(i);
                group.push(j);
            }
        }
        if owner.is_none() {
            return Err(Error::format(path, format!("latent unit {j} has no group")));
        }
    }
    let grouping = Grouping::new(groups, m)?;

    let eps_whiten = 1e-5 * eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let rank_deficient = eigenvalues.last().copied().unwrap_or(0.0) < eps_whiten;
    Ok(IsaModel {
        w,
        grouping,
        pca: PcaModel {
            mean,
            components,
            eigenvalues,
            whiten: true,
            eps_whiten,
            rank_deficient,
        },
        eps,
        objective_history: Vec::new(),
    })
}
