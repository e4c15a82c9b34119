//! Video container (CVID) and Middlebury ".flo" flow interchange.
//!
//! CVID: magic "CVID", u32 dims (W, H, T, C), f32 fps, i32 label (-1 when
//! absent), then the frames as a complete embedded CVOL record. The header
//! dims must agree with the embedded volume.
//!
//! ".flo": f32 magic 202021.25, i32 width, i32 height, then row-major
//! interleaved (u, v) f32 pairs. Components above 1e9 are unknown: they are
//! zeroed and reported in the mask.

use super::VideoClip;
use crate::binio::{self, Reader};
use crate::error::{Error, Result};
use crate::tensor::{read_cvol, write_cvol, Volume};
use std::io::Write;
use std::path::Path;

pub const CVID_MAGIC: &[u8; 4] = b"CVID";
pub const CTRJ_MAGIC: &[u8; 4] = b"CTRJ";
pub const FLO_MAGIC: f32 = 202021.25;

const FLO_UNKNOWN: f32 = 1e9;

pub fn write_cvid<W: Write>(w: &mut W, clip: &VideoClip) -> std::io::Result<()> {
    binio::write_magic(w, CVID_MAGIC)?;
    for d in clip.frames.dims() {
        binio::write_u32(w, d as u32)?;
    }
    binio::write_f32(w, clip.fps)?;
    binio::write_i32(w, clip.label.map(|l| l as i32).unwrap_or(-1))?;
    write_cvol(w, &clip.frames)
}

pub fn read_cvid(r: &mut Reader<'_>) -> Result<VideoClip> {
    r.expect_magic(CVID_MAGIC)?;
    let mut dims = [0u32; 4];
    for (i, d) in dims.iter_mut().enumerate() {
        *d = r.read_u32(&format!("dim {i}"))?;
    }
    let fps = r.read_f32("fps")?;
    let label = r.read_i32("label")?;
    let frames = read_cvol(r)?;
    if frames.dims().map(|d| d as u32) != dims {
        return Err(Error::format(
            r.path(),
            format!(
                "header dims {:?} disagree with embedded volume {:?}",
                dims,
                frames.dims()
            ),
        ));
    }
    let label = if label < 0 { None } else { Some(label as u32) };
    VideoClip::new(frames, fps, label)
}

pub fn save_video(path: &Path, clip: &VideoClip) -> Result<()> {
    binio::write_file(path, |buf| write_cvid(buf, clip))
}

pub fn load_video(path: &Path) -> Result<VideoClip> {
    let bytes = binio::read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    let clip = read_cvid(&mut r)?;
    r.expect_end()?;
    Ok(clip)
}

/// Reads a ".flo" field as a W x H x 1 x 2 volume plus a per-pixel known
/// mask (false where a component was marked unknown).
pub fn load_flow_middlebury(path: &Path) -> Result<(Volume, Vec<bool>)> {
    let bytes = binio::read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    let magic = r.read_f32("magic")?;
    if magic != FLO_MAGIC {
        return Err(Error::format(
            path,
            format!("bad magic {magic}, expected {FLO_MAGIC}"),
        ));
    }
    let w = r.read_i32("width")?;
    let h = r.read_i32("height")?;
    if w <= 0 || h <= 0 {
        return Err(Error::format(path, format!("bad dimensions {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    binio::checked_len(path, &[w as u32, h as u32, 2])?;
    let data = r.read_f32_vec(w * h * 2, "flow samples")?;
    r.expect_end()?;

    let mut flow = Volume::zeros([w, h, 1, 2]);
    let mut known = vec![true; w * h];
    for y in 0..h {
        for x in 0..w {
            let u = data[(y * w + x) * 2];
            let v = data[(y * w + x) * 2 + 1];
            if u.abs() > FLO_UNKNOWN || v.abs() > FLO_UNKNOWN || !u.is_finite() || !v.is_finite() {
                known[y * w + x] = false;
            } else {
                flow.set(x, y, 0, 0, u);
                flow.set(x, y, 0, 1, v);
            }
        }
    }
    Ok((flow, known))
}

pub fn save_flow_middlebury(path: &Path, flow: &Volume) -> Result<()> {
    if flow.nc() != 2 || flow.nt() != 1 {
        return Err(Error::ShapeMismatch {
            expected: "W x H x 1 x 2 flow field".into(),
            got: format!("{:?}", flow.dims()),
        });
    }
    binio::write_file(path, |w| {
        binio::write_f32(w, FLO_MAGIC)?;
        binio::write_i32(w, flow.nx() as i32)?;
        binio::write_i32(w, flow.ny() as i32)?;
        for y in 0..flow.ny() {
            for x in 0..flow.nx() {
                binio::write_f32(w, flow.get(x, y, 0, 0))?;
                binio::write_f32(w, flow.get(x, y, 0, 1))?;
            }
        }
        Ok(())
    })
}

/// Trajectory container: magic "CTRJ", u32 count, u32 length, then per
/// trajectory a u32 start frame and `length` (x, y) f32 pairs.
pub fn save_trajectories(path: &Path, trajectories: &[super::Trajectory]) -> Result<()> {
    let length = trajectories.first().map(|t| t.points.len()).unwrap_or(0);
    for (i, t) in trajectories.iter().enumerate() {
        if t.points.len() != length {
            return Err(Error::ShapeMismatch {
                expected: format!("trajectory length {length}"),
                got: format!("trajectory {i} has length {}", t.points.len()),
            });
        }
    }
    binio::write_file(path, |w| {
        binio::write_magic(w, CTRJ_MAGIC)?;
        binio::write_u32(w, trajectories.len() as u32)?;
        binio::write_u32(w, length as u32)?;
        for t in trajectories {
            binio::write_u32(w, t.start_frame as u32)?;
            for p in &t.points {
                binio::write_f32(w, p.0)?;
                binio::write_f32(w, p.1)?;
            }
        }
        Ok(())
    })
}

pub fn load_trajectories(path: &Path) -> Result<Vec<super::Trajectory>> {
    let bytes = binio::read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    r.expect_magic(CTRJ_MAGIC)?;
    let count = r.read_u32("count")? as usize;
    let length = r.read_u32("length")? as usize;
    binio::checked_len(path, &[count as u32, (2 * length + 1) as u32])?;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let start_frame = r.read_u32(&format!("trajectory {i} start"))? as usize;
        let coords = r.read_f32_vec(2 * length, &format!("trajectory {i} points"))?;
        let points = coords.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        out.push(super::Trajectory {
            points,
            start_frame,
        });
    }
    r.expect_end()?;
    Ok(out)
}
