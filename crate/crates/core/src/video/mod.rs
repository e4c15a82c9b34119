//! Video ingestion, optical-flow estimation, dense-trajectory tracking,
//! patch sampling, and the synthetic benchmark generator.

mod flow;
mod fmt;
mod synth;
mod track;

pub use flow::{estimate_flow, estimate_flow_stack, FlowConfig};
pub use fmt::{
    load_flow_middlebury, load_trajectories, load_video, read_cvid, save_flow_middlebury,
    save_trajectories, save_video, write_cvid, CTRJ_MAGIC, CVID_MAGIC, FLO_MAGIC,
};
pub use synth::{
    default_benchmark_classes, generate_synth_dataset, render_synth_clip, MotionPattern,
    SynthClip, SynthConfig,
};
pub use track::{sample_patch, track_trajectories, TrackConfig};

use crate::error::{Error, Result};
use crate::tensor::Volume;

/// Grayscale clip: frames as a W x H x T x 1 volume with intensities in
/// [0, 1], a nominal frame rate, and an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    pub frames: Volume,
    pub fps: f32,
    pub label: Option<u32>,
}

impl VideoClip {
    pub fn new(frames: Volume, fps: f32, label: Option<u32>) -> Result<Self> {
        if frames.nc() != 1 {
            return Err(Error::ChannelMismatch {
                input: frames.nc(),
                expected: 1,
            });
        }
        if let Some(v) = frames.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(
                "frames",
                format!("intensity {v} outside [0, 1]"),
            ));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::invalid("fps", format!("bad frame rate {fps}")));
        }
        Ok(VideoClip { frames, fps, label })
    }

    pub fn width(&self) -> usize {
        self.frames.nx()
    }

    pub fn height(&self) -> usize {
        self.frames.ny()
    }

    pub fn num_frames(&self) -> usize {
        self.frames.nt()
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.width(), self.height(), self.num_frames()]
    }

    /// One frame as a W x H x 1 x 1 volume.
    pub fn frame(&self, t: usize) -> Result<Volume> {
        self.frames.time_slice(t, t + 1)
    }
}

/// Tracked point sequence: one subpixel position per frame, starting at
/// `start_frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<(f32, f32)>,
    pub start_frame: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean position and mid frame, normalized by the clip dims (W, H, T).
    pub fn normalized_location(&self, clip_dims: [usize; 3]) -> [f32; 3] {
        let l = self.points.len().max(1) as f32;
        let sx: f32 = self.points.iter().map(|p| p.0).sum();
        let sy: f32 = self.points.iter().map(|p| p.1).sum();
        let mid_t = self.start_frame as f32 + (self.points.len().saturating_sub(1)) as f32 / 2.0;
        [
            (sx / l / clip_dims[0] as f32).clamp(0.0, 1.0),
            (sy / l / clip_dims[1] as f32).clamp(0.0, 1.0),
            (mid_t / clip_dims[2] as f32).clamp(0.0, 1.0),
        ]
    }

    /// Sum of frame-to-frame displacement magnitudes.
    pub fn total_displacement(&self) -> f32 {
        self.points
            .windows(2)
            .map(|p| {
                let dx = p[1].0 - p[0].0;
                let dy = p[1].1 - p[0].1;
                (dx * dx + dy * dy).sqrt()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_rejects_out_of_range_intensity() {
        let frames = Volume::from_vec([1, 1, 2, 1], vec![0.5, 1.5]).unwrap();
        assert!(VideoClip::new(frames, 25.0, None).is_err());
    }

    #[test]
    fn location_of_centered_trajectory() {
        let traj = Trajectory {
            points: vec![(32.0, 32.0); 15],
            start_frame: 0,
        };
        let loc = traj.normalized_location([64, 64, 30]);
        assert!((loc[0] - 0.5).abs() < 1e-6);
        assert!((loc[1] - 0.5).abs() < 1e-6);
        assert!((loc[2] - 7.0 / 30.0).abs() < 1e-6);
    }

    #[test]
    fn total_displacement_accumulates() {
        let traj = Trajectory {
            points: vec![(0.0, 0.0), (3.0, 4.0), (3.0, 4.0)],
            start_frame: 0,
        };
        assert!((traj.total_displacement() - 5.0).abs() < 1e-6);
    }
}
