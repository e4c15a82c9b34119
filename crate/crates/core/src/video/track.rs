//! Dense trajectory tracking and trajectory-aligned patch sampling.

use super::{Trajectory, VideoClip};
use crate::error::{Error, Result};
use crate::tensor::Volume;
use crate::two_stream::TrajectoryPatch;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackConfig {
    /// Trajectory length in frames.
    pub length: usize,
    /// Seed grid spacing in pixels.
    pub stride: usize,
    /// Minimum summed displacement over the whole trajectory; static
    /// trajectories below it are discarded.
    pub min_displacement: f32,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig {
            length: 15,
            stride: 5,
            min_displacement: 1.0,
        }
    }
}

/// 3x3 median filter per flow component, then bilinear sampling at a
/// subpixel point.
fn median_filtered_flow(flows: &Volume, t: usize) -> Volume {
    let [w, h, _, _] = flows.dims();
    let mut out = Volume::zeros([w, h, 1, 2]);
    let mut window = [0.0f32; 9];
    for c in 0..2 {
        for y in 0..h {
            for x in 0..w {
                let mut k = 0;
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                        let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                        window[k] = flows.get(xx, yy, t, c);
                        k += 1;
                    }
                }
                window.sort_by(|a, b| a.partial_cmp(b).unwrap());
                out.set(x, y, 0, c, window[4]);
            }
        }
    }
    out
}

fn bilinear_2ch(field: &Volume, x: f32, y: f32) -> (f32, f32) {
    let w = field.nx();
    let h = field.ny();
    let clamp_get = |xi: isize, yi: isize, c: usize| -> f32 {
        let xi = xi.clamp(0, w as isize - 1) as usize;
        let yi = yi.clamp(0, h as isize - 1) as usize;
        field.get(xi, yi, 0, c)
    };
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let mut out = [0.0f32; 2];
    for (c, slot) in out.iter_mut().enumerate() {
        let a = clamp_get(x0, y0, c);
        let b = clamp_get(x0 + 1, y0, c);
        let cc = clamp_get(x0, y0 + 1, c);
        let d = clamp_get(x0 + 1, y0 + 1, c);
        *slot = a * (1.0 - fx) * (1.0 - fy) + b * fx * (1.0 - fy) + cc * (1.0 - fx) * fy
            + d * fx * fy;
    }
    (out[0], out[1])
}

/// Seeds a stride-spaced grid on every admissible start frame and advances
/// each point through median-filtered flow with bilinear sampling.
///
/// Trajectories that leave the frame or whose summed displacement stays
/// below `min_displacement` are discarded. Start frames are limited to
/// `t0 <= T - length - 1` so that a flow field exists at every trajectory
/// frame and flow-aligned patches cover the full trajectory.
pub fn track_trajectories(
    clip: &VideoClip,
    flows: &Volume,
    cfg: &TrackConfig,
) -> Result<Vec<Trajectory>> {
    if cfg.length < 2 {
        return Err(Error::invalid("length", "trajectory length must be >= 2"));
    }
    if cfg.stride == 0 {
        return Err(Error::invalid("stride", "seed stride must be >= 1"));
    }
    let [w, h, t_clip] = clip.dims();
    if flows.nx() != w || flows.ny() != h || flows.nt() + 1 != t_clip || flows.nc() != 2 {
        return Err(Error::ShapeMismatch {
            expected: format!("flow stack {}x{}x{}x2 for the clip", w, h, t_clip - 1),
            got: format!("{:?}", flows.dims()),
        });
    }

    let mut trajectories = Vec::new();
    if t_clip < cfg.length + 1 {
        return Ok(trajectories);
    }

    // median-filtered flow per frame, computed once
    let filtered: Vec<Volume> = (0..flows.nt()).map(|t| median_filtered_flow(flows, t)).collect();

    let in_bounds =
        |x: f32, y: f32| x >= 0.0 && y >= 0.0 && x <= (w - 1) as f32 && y <= (h - 1) as f32;

    for t0 in 0..=(t_clip - cfg.length - 1) {
        let mut ys = 0;
        while ys < h {
            let mut xs = 0;
            while xs < w {
                let mut points = Vec::with_capacity(cfg.length);
                let mut p = (xs as f32, ys as f32);
                points.push(p);
                let mut alive = true;
                for step in 0..cfg.length - 1 {
                    let (u, v) = bilinear_2ch(&filtered[t0 + step], p.0, p.1);
                    p = (p.0 + u, p.1 + v);
                    if !in_bounds(p.0, p.1) {
                        alive = false;
                        break;
                    }
                    points.push(p);
                }
                if alive {
                    let traj = Trajectory {
                        points,
                        start_frame: t0,
                    };
                    if traj.total_displacement() >= cfg.min_displacement {
                        trajectories.push(traj);
                    }
                }
                xs += cfg.stride;
            }
            ys += cfg.stride;
        }
    }
    Ok(trajectories)
}

/// Bilinearly resamples a P x P window around every trajectory point from
/// `stack` (pixels or flow, any channel count) and stacks them over the
/// trajectory frames.
///
/// Windows reaching outside the stack, or trajectory frames past the end of
/// the stack, are zero-padded and flagged. Location is the trajectory mean
/// normalized by `clip_dims`.
pub fn sample_patch(
    stack: &Volume,
    traj: &Trajectory,
    patch_size: usize,
    clip_dims: [usize; 3],
) -> Result<TrajectoryPatch> {
    if patch_size == 0 {
        return Err(Error::invalid("patch_size", "must be >= 1"));
    }
    if traj.points.is_empty() {
        return Err(Error::invalid("trajectory", "no points"));
    }
    let [w, h, t_stack, c_stack] = stack.dims();
    let l = traj.points.len();
    let p = patch_size;
    let half = (p as f32 - 1.0) / 2.0;
    let mut clipped = false;
    let mut volume = Volume::zeros([p, p, l, c_stack]);

    for (i, &(cx, cy)) in traj.points.iter().enumerate() {
        let t = traj.start_frame + i;
        if t >= t_stack {
            clipped = true;
            continue; // stays zero
        }
        for py in 0..p {
            for px in 0..p {
                let sx = cx - half + px as f32;
                let sy = cy - half + py as f32;
                // bilinear with zero outside the frame
                let x0 = sx.floor();
                let y0 = sy.floor();
                let fx = sx - x0;
                let fy = sy - y0;
                let (x0, y0) = (x0 as isize, y0 as isize);
                let mut tap = |xi: isize, yi: isize, c: usize| -> f32 {
                    if xi < 0 || yi < 0 || xi >= w as isize || yi >= h as isize {
                        clipped = true;
                        0.0
                    } else {
                        stack.get(xi as usize, yi as usize, t, c)
                    }
                };
                for c in 0..c_stack {
                    let v = tap(x0, y0, c) * (1.0 - fx) * (1.0 - fy)
                        + tap(x0 + 1, y0, c) * fx * (1.0 - fy)
                        + tap(x0, y0 + 1, c) * (1.0 - fx) * fy
                        + tap(x0 + 1, y0 + 1, c) * fx * fy;
                    volume.set(px, py, i, c, v);
                }
            }
        }
    }

    Ok(TrajectoryPatch {
        volume,
        location: traj.normalized_location(clip_dims),
        clipped,
    })
}
