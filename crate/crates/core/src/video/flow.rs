//! Dense optical flow: Horn-Schunck with a coarse-to-fine pyramid.
//!
//! Per pyramid level the current estimate warps the second frame toward
//! the first, an incremental field is solved by the classic Jacobi
//! iteration on the smoothness-regularized least squares, and the sum is
//! upsampled to the next level. The fixed iteration count keeps runs
//! deterministic.

use crate::error::{Error, Result};
use crate::tensor::Volume;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    /// Smoothness weight on the same scale as image gradients; intensities
    /// live in [0, 1], so useful values sit well below 1.
    pub alpha: f32,
    /// Jacobi iterations per warp.
    pub iterations: usize,
    /// Pyramid levels; clamped so the coarsest level keeps at least 8 px.
    pub levels: usize,
    /// Warp-and-refine passes per pyramid level.
    pub warps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            alpha: 0.05,
            iterations: 100,
            levels: 3,
            warps: 2,
        }
    }
}

struct Image {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Image {
    fn from_volume(v: &Volume) -> Image {
        let (w, h) = (v.nx(), v.ny());
        let mut data = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                data[y * w + x] = v.get(x, y, 0, 0);
            }
        }
        Image { w, h, data }
    }

    #[inline]
    fn at(&self, x: isize, y: isize) -> f32 {
        // replicate borders
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.data[y * self.w + x]
    }

    fn bilinear(&self, x: f32, y: f32) -> f32 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as isize, y0 as isize);
        let a = self.at(x0, y0);
        let b = self.at(x0 + 1, y0);
        let c = self.at(x0, y0 + 1);
        let d = self.at(x0 + 1, y0 + 1);
        a * (1.0 - fx) * (1.0 - fy) + b * fx * (1.0 - fy) + c * (1.0 - fx) * fy + d * fx * fy
    }

    fn downsample(&self) -> Image {
        let w = (self.w / 2).max(1);
        let h = (self.h / 2).max(1);
        let mut data = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for dy in 0..2 {
                    for dx in 0..2 {
                        acc += self.at((2 * x + dx) as isize, (2 * y + dy) as isize);
                    }
                }
                data[y * w + x] = acc / 4.0;
            }
        }
        Image { w, h, data }
    }
}

struct Field {
    w: usize,
    h: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl Field {
    fn zeros(w: usize, h: usize) -> Field {
        Field {
            w,
            h,
            u: vec![0.0; w * h],
            v: vec![0.0; w * h],
        }
    }

    /// Bilinear upsample to (w, h) with displacements doubled.
    fn upsample(&self, w: usize, h: usize) -> Field {
        let mut out = Field::zeros(w, h);
        let sx = self.w as f32 / w as f32;
        let sy = self.h as f32 / h as f32;
        let img_u = Image {
            w: self.w,
            h: self.h,
            data: self.u.clone(),
        };
        let img_v = Image {
            w: self.w,
            h: self.h,
            data: self.v.clone(),
        };
        for y in 0..h {
            for x in 0..w {
                let px = (x as f32 + 0.5) * sx - 0.5;
                let py = (y as f32 + 0.5) * sy - 0.5;
                out.u[y * w + x] = img_u.bilinear(px, py) * 2.0;
                out.v[y * w + x] = img_v.bilinear(px, py) * 2.0;
            }
        }
        out
    }
}

/// Weighted neighborhood average used by the Jacobi update.
fn local_average(field: &[f32], w: usize, h: usize, out: &mut [f32]) {
    let at = |x: isize, y: isize| -> f32 {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        field[y * w + x]
    };
    for y in 0..h as isize {
        for x in 0..w as isize {
            let edge = (at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1)) / 6.0;
            let corner = (at(x - 1, y - 1) + at(x + 1, y - 1) + at(x - 1, y + 1) + at(x + 1, y + 1))
                / 12.0;
            out[(y as usize) * w + x as usize] = edge + corner;
        }
    }
}

fn horn_schunck_level(a: &Image, b: &Image, init: Field, cfg: &FlowConfig) -> Field {
    let (w, h) = (a.w, a.h);
    let n = w * h;

    // warp b toward a by the initial field
    let mut bw = vec![0.0f32; n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            bw[i] = b.bilinear(x as f32 + init.u[i], y as f32 + init.v[i]);
        }
    }
    let bw = Image { w, h, data: bw };

    // derivatives averaged over the frame pair
    let mut ix = vec![0.0f32; n];
    let mut iy = vec![0.0f32; n];
    let mut it = vec![0.0f32; n];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = (y as usize) * w + x as usize;
            ix[i] = 0.25
                * (a.at(x + 1, y) - a.at(x - 1, y) + bw.at(x + 1, y) - bw.at(x - 1, y));
            iy[i] = 0.25
                * (a.at(x, y + 1) - a.at(x, y - 1) + bw.at(x, y + 1) - bw.at(x, y - 1));
            it[i] = bw.at(x, y) - a.at(x, y);
        }
    }

    let alpha2 = cfg.alpha * cfg.alpha;
    let mut du = vec![0.0f32; n];
    let mut dv = vec![0.0f32; n];
    let mut du_bar = vec![0.0f32; n];
    let mut dv_bar = vec![0.0f32; n];
    for _ in 0..cfg.iterations {
        local_average(&du, w, h, &mut du_bar);
        local_average(&dv, w, h, &mut dv_bar);
        for i in 0..n {
            let num = ix[i] * du_bar[i] + iy[i] * dv_bar[i] + it[i];
            let den = alpha2 + ix[i] * ix[i] + iy[i] * iy[i];
            let s = num / den;
            du[i] = du_bar[i] - ix[i] * s;
            dv[i] = dv_bar[i] - iy[i] * s;
        }
    }

    let mut out = init;
    for i in 0..n {
        out.u[i] += du[i];
        out.v[i] += dv[i];
    }
    out
}

/// Estimates per-pixel (u, v) displacement from frame `a` to frame `b`.
pub fn estimate_flow(a: &Volume, b: &Volume, cfg: &FlowConfig) -> Result<Volume> {
    if a.dims() != b.dims() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", a.dims()),
            got: format!("{:?}", b.dims()),
        });
    }
    if a.nc() != 1 || a.nt() != 1 {
        return Err(Error::ShapeMismatch {
            expected: "W x H x 1 x 1 frames".into(),
            got: format!("{:?}", a.dims()),
        });
    }
    if cfg.iterations == 0 || cfg.alpha <= 0.0 {
        return Err(Error::invalid("flow", "alpha and iterations must be positive"));
    }

    // pyramids, clamped so the coarsest level stays usable
    let mut pa = vec![Image::from_volume(a)];
    let mut pb = vec![Image::from_volume(b)];
    for _ in 1..cfg.levels.max(1) {
        let last = pa.last().unwrap();
        if last.w / 2 < 8 || last.h / 2 < 8 {
            break;
        }
        pa.push(pa.last().unwrap().downsample());
        pb.push(pb.last().unwrap().downsample());
    }

    let mut field = Field::zeros(pa.last().unwrap().w, pa.last().unwrap().h);
    for level in (0..pa.len()).rev() {
        let (ia, ib) = (&pa[level], &pb[level]);
        if field.w != ia.w || field.h != ia.h {
            field = field.upsample(ia.w, ia.h);
        }
        for _ in 0..cfg.warps.max(1) {
            field = horn_schunck_level(ia, ib, field, cfg);
        }
    }

    let (w, h) = (a.nx(), a.ny());
    let mut out = Volume::zeros([w, h, 1, 2]);
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, 0, 0, field.u[y * w + x]);
            out.set(x, y, 0, 1, field.v[y * w + x]);
        }
    }
    out.check_finite()?;
    Ok(out)
}

/// Flow for every consecutive frame pair of a clip, stacked into a
/// W x H x (T-1) x 2 volume. Pairs run in parallel; output order follows
/// frame order.
pub fn estimate_flow_stack(frames: &Volume, cfg: &FlowConfig) -> Result<Volume> {
    if frames.nt() < 2 {
        return Err(Error::invalid("frames", "need at least 2 frames for flow"));
    }
    let fields: Vec<Volume> = (0..frames.nt() - 1)
        .into_par_iter()
        .map(|t| {
            let a = frames.time_slice(t, t + 1)?;
            let b = frames.time_slice(t + 1, t + 2)?;
            estimate_flow(&a, &b, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let [w, h, _, _] = frames.dims();
    let out = Volume::from_fn([w, h, frames.nt() - 1, 2], |x, y, t, c| {
        fields[t].get(x, y, 0, c)
    });
    Ok(out)
}
