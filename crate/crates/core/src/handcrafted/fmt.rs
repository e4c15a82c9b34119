//! CDSC descriptor container: magic "CDSC", u32 kind tag, u32 count, u32
//! dim, then per row `dim` f32 values followed by 3 f32 location
//! coordinates.

use super::{DescriptorKind, IdtDescriptor};
use crate::binio::{self, Reader};
use crate::error::{Error, Result};
use std::path::Path;

pub const CDSC_MAGIC: &[u8; 4] = b"CDSC";

pub fn write_cdsc_file(path: &Path, kind: DescriptorKind, rows: &[IdtDescriptor]) -> Result<()> {
    let dim = rows.first().map(|r| r.values.len()).unwrap_or(0);
    for (i, row) in rows.iter().enumerate() {
        if row.kind != kind {
            return Err(Error::invalid(
                "rows",
                format!("row {i} has kind {:?}, file is {:?}", row.kind, kind),
            ));
        }
        if row.values.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: format!("dim {dim}"),
                got: format!("row {i} has dim {}", row.values.len()),
            });
        }
    }
    binio::write_file(path, |w| {
        binio::write_magic(w, CDSC_MAGIC)?;
        binio::write_u32(w, kind.tag())?;
        binio::write_u32(w, rows.len() as u32)?;
        binio::write_u32(w, dim as u32)?;
        for row in rows {
            binio::write_f32_slice(w, &row.values)?;
            binio::write_f32_slice(w, &row.location)?;
        }
        Ok(())
    })
}

pub fn read_cdsc_file(path: &Path) -> Result<(DescriptorKind, Vec<IdtDescriptor>)> {
    let bytes = binio::read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    r.expect_magic(CDSC_MAGIC)?;
    let tag = r.read_u32("kind tag")?;
    let kind = DescriptorKind::from_tag(tag)
        .ok_or_else(|| Error::format(path, format!("unknown descriptor kind tag {tag}")))?;
    let count = r.read_u32("count")? as usize;
    let dim = r.read_u32("dim")? as usize;
    binio::checked_len(path, &[count as u32, (dim + 3) as u32])?;
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let values = r.read_f32_vec(dim, &format!("row {i} values"))?;
        let loc = r.read_f32_vec(3, &format!("row {i} location"))?;
        rows.push(IdtDescriptor::new(values, kind, [loc[0], loc[1], loc[2]])?);
    }
    r.expect_end()?;
    Ok((kind, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let rows = vec![
            IdtDescriptor::new(vec![1.0, 2.0, 3.0], DescriptorKind::Hog, [0.1, 0.2, 0.3]).unwrap(),
            IdtDescriptor::new(vec![-1.0, 0.5, 0.0], DescriptorKind::Hog, [0.9, 0.8, 0.7]).unwrap(),
        ];
        let dir = std::env::temp_dir().join("convisa_cdsc_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.cdsc");
        write_cdsc_file(&path, DescriptorKind::Hog, &rows).unwrap();
        let (kind, back) = read_cdsc_file(&path).unwrap();
        assert_eq!(kind, DescriptorKind::Hog);
        assert_eq!(back, rows);
    }

    #[test]
    fn kind_mismatch_rejected_on_write() {
        let rows = vec![IdtDescriptor::new(vec![1.0], DescriptorKind::Hof, [0.0, 0.0, 0.0]).unwrap()];
        let path = std::env::temp_dir().join("convisa_cdsc_bad.cdsc");
        assert!(write_cdsc_file(&path, DescriptorKind::Hog, &rows).is_err());
    }
}
