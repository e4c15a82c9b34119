//! CVOL interchange format: magic "CVOL", four u32 dims (N, M, T, C), then
//! N*M*T*C little-endian f32 samples in x-fastest order.

use super::Volume;
use crate::binio::{self, Reader};
use crate::error::Result;
use std::io::Write;
use std::path::Path;

pub const CVOL_MAGIC: &[u8; 4] = b"CVOL";

pub fn write_cvol<W: Write>(w: &mut W, v: &Volume) -> std::io::Result<()> {
    binio::write_magic(w, CVOL_MAGIC)?;
    for d in v.dims() {
        binio::write_u32(w, d as u32)?;
    }
    binio::write_f32_slice(w, v.data())
}

pub fn read_cvol(r: &mut Reader<'_>) -> Result<Volume> {
    r.expect_magic(CVOL_MAGIC)?;
    let mut dims = [0u32; 4];
    for (i, d) in dims.iter_mut().enumerate() {
        *d = r.read_u32(&format!("dim {i}"))?;
    }
    let len = binio::checked_len(r.path(), &dims)?;
    let data = r.read_f32_vec(len, "samples")?;
    Volume::from_vec(dims.map(|d| d as usize), data)
}

pub fn write_cvol_file(path: &Path, v: &Volume) -> Result<()> {
    binio::write_file(path, |buf| write_cvol(buf, v))
}

pub fn read_cvol_file(path: &Path) -> Result<Volume> {
    let data = binio::read_file(path)?;
    let mut r = Reader::new(path, &data);
    let v = read_cvol(&mut r)?;
    r.expect_end()?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn round_trip_is_exact() {
        let v = Volume::from_fn([3, 2, 4, 2], |x, y, t, c| {
            (x as f32 * 0.37 + y as f32 * 1.1 - t as f32 * 2.3 + c as f32).sin()
        });
        let mut buf = Vec::new();
        write_cvol(&mut buf, &v).unwrap();
        let mut r = Reader::new(Path::new("mem"), &buf);
        let back = read_cvol(&mut r).unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn truncated_payload_names_byte_range() {
        let v = Volume::zeros([2, 2, 1, 1]);
        let mut buf = Vec::new();
        write_cvol(&mut buf, &v).unwrap();
        buf.truncate(buf.len() - 3);
        let mut r = Reader::new(Path::new("mem"), &buf);
        match read_cvol(&mut r) {
            Err(Error::Format { reason, .. }) => assert!(reason.contains("truncated")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn zero_dim_header_rejected() {
        let mut buf = Vec::new();
        buf.extend_from_slice(CVOL_MAGIC);
        for d in [2u32, 2, 0, 1] {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        let mut r = Reader::new(Path::new("mem"), &buf);
        assert!(read_cvol(&mut r).is_err());
    }

    #[test]
    fn bad_magic_rejected() {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"XVOL");
        buf.extend_from_slice(&[0u8; 16]);
        let mut r = Reader::new(Path::new("mem"), &buf);
        assert!(read_cvol(&mut r).is_err());
    }
}
