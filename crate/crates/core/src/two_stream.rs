//! Two-stream learned descriptors and the temporal-correlation diagnostic.
//!
//! The appearance stream (LOP) applies one learned model to whole stacks of
//! frames, so temporal integration lives inside the filters (temporal
//! projection). The motion stream (LOF) applies the model to each flow
//! frame and pools the outputs over time (temporal pooling). Either stream
//! can be run with either temporal structure, which is what the benchmark
//! comparisons exercise.

use crate::error::{Error, Result};
use crate::handcrafted::{DescriptorKind, IdtDescriptor};
use crate::isa::{isa_activation, isa_plus_extract, IsaModel};
use crate::tensor::Volume;

/// Trajectory-aligned sub-volume plus its normalized space-time location.
/// `clipped` is set when any sampling window was zero-padded at a border.
#[derive(Debug, Clone)]
pub struct TrajectoryPatch {
    pub volume: Volume,
    pub location: [f32; 3],
    pub clipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Appearance,
    Motion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalPool {
    Mean,
    Max,
}

/// How a cell's temporal extent meets the model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum TemporalStructure {
    /// Filters span `stack_len` stacked frames; temporal integration is
    /// implicit in the filters.
    Projection { stack_len: usize },
    /// Filters see one frame at a time; outputs are pooled across the
    /// cell's frames.
    Pooling { op: TemporalPool },
}

/// Which part of the learned model feeds the descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// Top-d whitened PCA coefficients only.
    Pca,
    /// ISA activations only.
    Isa,
    /// Both halves concatenated (ISA+).
    IsaPlus,
}

impl FeatureMode {
    pub fn dim(self, d: usize) -> usize {
        match self {
            FeatureMode::Pca | FeatureMode::Isa => d,
            FeatureMode::IsaPlus => 2 * d,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pca" => FeatureMode::Pca,
            "isa" => FeatureMode::Isa,
            "isa+" | "isaplus" | "isa_plus" => FeatureMode::IsaPlus,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::Pca => "pca",
            FeatureMode::Isa => "isa",
            FeatureMode::IsaPlus => "isa+",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub stream: Stream,
    pub cell_grid: (usize, usize, usize),
    pub structure: TemporalStructure,
    pub mode: FeatureMode,
}

impl StreamConfig {
    /// LOP defaults: appearance patches through 5-frame temporal projection.
    pub fn lop_default() -> Self {
        StreamConfig {
            stream: Stream::Appearance,
            cell_grid: (2, 2, 3),
            structure: TemporalStructure::Projection { stack_len: 5 },
            mode: FeatureMode::IsaPlus,
        }
    }

    /// LOF defaults: per-frame flow features with mean temporal pooling.
    pub fn lof_default() -> Self {
        StreamConfig {
            stream: Stream::Motion,
            cell_grid: (2, 2, 3),
            structure: TemporalStructure::Pooling {
                op: TemporalPool::Mean,
            },
            mode: FeatureMode::IsaPlus,
        }
    }

    pub fn descriptor_kind(&self) -> DescriptorKind {
        match self.stream {
            Stream::Appearance => DescriptorKind::Lop,
            Stream::Motion => DescriptorKind::Lof,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.cell_grid.0 * self.cell_grid.1 * self.cell_grid.2
    }

    /// Model input dimension implied by a cell of `(cell_w, cell_h)` pixels
    /// with `channels` channels.
    pub fn model_input_dim(&self, cell_w: usize, cell_h: usize, channels: usize) -> usize {
        match self.structure {
            TemporalStructure::Projection { stack_len } => cell_w * cell_h * stack_len * channels,
            TemporalStructure::Pooling { .. } => cell_w * cell_h * channels,
        }
    }
}

/// Splits a patch into `gx*gy*gt` sub-volumes in raster order (x fastest,
/// then y, then t), clipping any remainder at the high ends.
pub fn build_cell_grid(patch: &TrajectoryPatch, grid: (usize, usize, usize)) -> Result<Vec<Volume>> {
    let (gx, gy, gt) = grid;
    let [nx, ny, nt, _] = patch.volume.dims();
    if gx == 0 || gy == 0 || gt == 0 {
        return Err(Error::invalid("grid", "cell grid components must be >= 1"));
    }
    if gx > nx || gy > ny || gt > nt {
        return Err(Error::invalid(
            "grid",
            format!("grid {grid:?} exceeds patch dims {:?}", patch.volume.dims()),
        ));
    }
    let (cw, ch, ct) = (nx / gx, ny / gy, nt / gt);
    let mut cells = Vec::with_capacity(gx * gy * gt);
    for t in 0..gt {
        for y in 0..gy {
            for x in 0..gx {
                let cell = Volume::from_fn([cw, ch, ct, patch.volume.nc()], |cx, cy, ctt, c| {
                    patch.volume.get(x * cw + cx, y * ch + cy, t * ct + ctt, c)
                });
                cells.push(cell);
            }
        }
    }
    Ok(cells)
}

fn features_for(model: &IsaModel, input: &[f32], mode: FeatureMode) -> Result<Vec<f32>> {
    match mode {
        FeatureMode::IsaPlus => isa_plus_extract(model, input),
        FeatureMode::Pca => {
            let y = model.pca.project(input)?;
            Ok(y[..model.output_dim()].iter().map(|&v| v as f32).collect())
        }
        FeatureMode::Isa => {
            let y = model.pca.project(input)?;
            let p = isa_activation(model, &y)?;
            Ok(p.iter().map(|&v| v as f32).collect())
        }
    }
}

/// Extracts one learned descriptor from a trajectory-aligned patch: per
/// cell, the model is applied according to the temporal structure and the
/// per-cell features are concatenated in cell raster order.
pub fn extract_descriptor(
    patch: &TrajectoryPatch,
    model: &IsaModel,
    cfg: &StreamConfig,
) -> Result<IdtDescriptor> {
    let cells = build_cell_grid(patch, cfg.cell_grid)?;
    let [cw, ch, ct, cc] = cells[0].dims();
    let expected = cfg.model_input_dim(cw, ch, cc);
    if expected != model.raw_dim() {
        return Err(Error::ShapeMismatch {
            expected: format!(
                "model with raw input dim {expected} for {:?} cells {cw}x{ch}x{ct}x{cc}",
                cfg.structure
            ),
            got: format!("model raw input dim {}", model.raw_dim()),
        });
    }

    let feat_dim = cfg.mode.dim(model.output_dim());
    let mut values = Vec::with_capacity(cells.len() * feat_dim);
    for cell in &cells {
        match cfg.structure {
            TemporalStructure::Projection { stack_len } => {
                if ct % stack_len != 0 {
                    return Err(Error::invalid(
                        "stack_len",
                        format!("stack length {stack_len} does not divide cell extent {ct}"),
                    ));
                }
                // average over the (usually single) stacks of the cell
                let stacks = ct / stack_len;
                let mut acc = vec![0.0f64; feat_dim];
                for s in 0..stacks {
                    let stack = cell.time_slice(s * stack_len, (s + 1) * stack_len)?;
                    let f = features_for(model, stack.data(), cfg.mode)?;
                    for (a, v) in acc.iter_mut().zip(f.iter()) {
                        *a += *v as f64;
                    }
                }
                values.extend(acc.iter().map(|&v| (v / stacks as f64) as f32));
            }
            TemporalStructure::Pooling { op } => {
                let mut acc = vec![0.0f64; feat_dim];
                let mut mx = vec![f32::NEG_INFINITY; feat_dim];
                for t in 0..ct {
                    let frame = cell.time_slice(t, t + 1)?;
                    let f = features_for(model, frame.data(), cfg.mode)?;
                    for i in 0..feat_dim {
                        acc[i] += f[i] as f64;
                        mx[i] = mx[i].max(f[i]);
                    }
                }
                match op {
                    TemporalPool::Mean => {
                        values.extend(acc.iter().map(|&v| (v / ct as f64) as f32))
                    }
                    TemporalPool::Max => values.extend_from_slice(&mx),
                }
            }
        }
    }

    IdtDescriptor::new(values, cfg.descriptor_kind(), patch.location)
}

/// LOP: appearance patch through temporal projection.
pub fn extract_lop(patch: &TrajectoryPatch, model: &IsaModel, cfg: &StreamConfig) -> Result<IdtDescriptor> {
    if cfg.stream != Stream::Appearance {
        return Err(Error::invalid("stream", "extract_lop expects the appearance stream"));
    }
    extract_descriptor(patch, model, cfg)
}

/// LOF: flow patch through explicit temporal pooling.
pub fn extract_lof(patch: &TrajectoryPatch, model: &IsaModel, cfg: &StreamConfig) -> Result<IdtDescriptor> {
    if cfg.stream != Stream::Motion {
        return Err(Error::invalid("stream", "extract_lof expects the motion stream"));
    }
    extract_descriptor(patch, model, cfg)
}

/// Pearson correlation between consecutive-frame sample pairs, pooled over
/// all patches and frame pairs. Frame pairs where either frame has no
/// spatial variance are skipped; if everything is skipped the measurement
/// is degenerate.
pub fn temporal_correlation(patches: &[TrajectoryPatch]) -> Result<f64> {
    let mut n = 0.0f64;
    let mut sa = 0.0f64;
    let mut sb = 0.0f64;
    let mut saa = 0.0f64;
    let mut sbb = 0.0f64;
    let mut sab = 0.0f64;

    for patch in patches {
        let v = &patch.volume;
        let [nx, ny, nt, nc] = v.dims();
        if nt < 2 {
            return Err(Error::invalid("patches", "every patch needs at least 2 frames"));
        }
        let frame_var = |t: usize| -> f64 {
            let mut s = 0.0f64;
            let mut ss = 0.0f64;
            for c in 0..nc {
                for y in 0..ny {
                    for x in 0..nx {
                        let val = v.get(x, y, t, c) as f64;
                        s += val;
                        ss += val * val;
                    }
                }
            }
            let count = (nx * ny * nc) as f64;
            let mean = s / count;
            ss / count - mean * mean
        };
        for t in 0..nt - 1 {
            if frame_var(t) <= 1e-12 || frame_var(t + 1) <= 1e-12 {
                continue; // zero-variance frame
            }
            for c in 0..nc {
                for y in 0..ny {
                    for x in 0..nx {
                        let a = v.get(x, y, t, c) as f64;
                        let b = v.get(x, y, t + 1, c) as f64;
                        n += 1.0;
                        sa += a;
                        sb += b;
                        saa += a * a;
                        sbb += b * b;
                        sab += a * b;
                    }
                }
            }
        }
    }

    if n == 0.0 {
        return Err(Error::Degenerate(
            "all frame pairs skipped: no variance anywhere".into(),
        ));
    }
    let cov = n * sab - sa * sb;
    let var_a = n * saa - sa * sa;
    let var_b = n * sbb - sb * sb;
    if var_a <= 0.0 || var_b <= 0.0 {
        return Err(Error::Degenerate("pooled sample has zero variance".into()));
    }
    Ok((cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{train_isa, IsaTrainConfig};
    use crate::rng;

    fn patch_from_fn(
        dims: [usize; 4],
        f: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> TrajectoryPatch {
        TrajectoryPatch {
            volume: Volume::from_fn(dims, f),
            location: [0.5, 0.5, 0.5],
            clipped: false,
        }
    }

    #[test]
    fn cell_grid_partitions_exactly() {
        let patch = patch_from_fn([32, 32, 15, 1], |x, y, t, _| (x + 100 * y + 7 * t) as f32);
        let cells = build_cell_grid(&patch, (2, 2, 3)).unwrap();
        assert_eq!(cells.len(), 12);
        for cell in &cells {
            assert_eq!(cell.dims(), [16, 16, 5, 1]);
        }
        // reassembling the cells reproduces the patch
        for (i, cell) in cells.iter().enumerate() {
            let (gx, gy) = (i % 2, (i / 2) % 2);
            let gt = i / 4;
            for t in 0..5 {
                for y in 0..16 {
                    for x in 0..16 {
                        assert_eq!(
                            cell.get(x, y, t, 0),
                            patch.volume.get(gx * 16 + x, gy * 16 + y, gt * 5 + t, 0)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn unit_grid_is_whole_patch() {
        let patch = patch_from_fn([8, 8, 6, 2], |x, y, t, c| (x + y + t + c) as f32);
        let cells = build_cell_grid(&patch, (1, 1, 1)).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0], patch.volume);
    }

    #[test]
    fn oversized_grid_rejected() {
        let patch = patch_from_fn([4, 4, 2, 1], |_, _, _, _| 0.0);
        assert!(build_cell_grid(&patch, (1, 1, 3)).is_err());
    }

    fn trained_model(seed: u64, raw_dim: usize, out_dim: usize) -> IsaModel {
        let mut r = rng::seeded(seed);
        let rows: Vec<Vec<f32>> = (0..600)
            .map(|_| (0..raw_dim).map(|_| rng::normal_f32(&mut r)).collect())
            .collect();
        train_isa(
            &rows,
            &IsaTrainConfig {
                group_size: 2,
                out_dim,
                pca_dim: None,
                learning_rate: 0.5,
                epochs: 15,
                batch_size: 0,
                eps: 1e-8,
                seed,
            },
        )
        .unwrap()
    }

    #[test]
    fn lop_descriptor_has_cells_times_mode_dim() {
        // 8x8 patch, (2,2,3) grid -> 4x4 cells, 6 frames -> 2-frame cells
        let model = trained_model(5, 4 * 4 * 2, 4);
        let cfg = StreamConfig {
            stream: Stream::Appearance,
            cell_grid: (2, 2, 3),
            structure: TemporalStructure::Projection { stack_len: 2 },
            mode: FeatureMode::IsaPlus,
        };
        let patch = patch_from_fn([8, 8, 6, 1], |x, y, t, _| {
            ((x * 3 + y * 5 + t * 7) as f32 * 0.1).sin()
        });
        let d = extract_lop(&patch, &model, &cfg).unwrap();
        assert_eq!(d.values.len(), 12 * 2 * 4);
        assert_eq!(d.kind, DescriptorKind::Lop);

        // pca and isa variants take half the width
        for mode in [FeatureMode::Pca, FeatureMode::Isa] {
            let cfg = StreamConfig { mode, ..cfg };
            let d = extract_descriptor(&patch, &model, &cfg).unwrap();
            assert_eq!(d.values.len(), 12 * 4);
        }
    }

    #[test]
    fn lof_is_invariant_to_frame_permutation_within_cells() {
        let model = trained_model(7, 4 * 4 * 2, 4);
        let cfg = StreamConfig {
            stream: Stream::Motion,
            cell_grid: (2, 2, 1),
            structure: TemporalStructure::Pooling {
                op: TemporalPool::Mean,
            },
            mode: FeatureMode::IsaPlus,
        };
        let mut r = rng::seeded(8);
        let base = Volume::from_fn([8, 8, 4, 2], |_, _, _, _| rng::normal_f32(&mut r));
        let patch = TrajectoryPatch {
            volume: base.clone(),
            location: [0.5, 0.5, 0.5],
            clipped: false,
        };
        // reverse the frames
        let permuted = TrajectoryPatch {
            volume: Volume::from_fn([8, 8, 4, 2], |x, y, t, c| base.get(x, y, 3 - t, c)),
            location: [0.5, 0.5, 0.5],
            clipped: false,
        };
        let a = extract_lof(&patch, &model, &cfg).unwrap();
        let b = extract_lof(&permuted, &model, &cfg).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert!((x - y).abs() < 1e-5, "{x} vs {y}");
        }

        // max pooling is permutation-invariant too
        let cfg_max = StreamConfig {
            structure: TemporalStructure::Pooling {
                op: TemporalPool::Max,
            },
            ..cfg
        };
        let a = extract_lof(&patch, &model, &cfg_max).unwrap();
        let b = extract_lof(&permuted, &model, &cfg_max).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn lop_is_sensitive_to_frame_order() {
        let model = trained_model(9, 4 * 4 * 4, 4);
        let cfg = StreamConfig {
            stream: Stream::Appearance,
            cell_grid: (2, 2, 1),
            structure: TemporalStructure::Projection { stack_len: 4 },
            mode: FeatureMode::IsaPlus,
        };
        let mut r = rng::seeded(10);
        let base = Volume::from_fn([8, 8, 4, 1], |_, _, _, _| rng::normal_f32(&mut r));
        let patch = TrajectoryPatch {
            volume: base.clone(),
            location: [0.5, 0.5, 0.5],
            clipped: false,
        };
        let permuted = TrajectoryPatch {
            volume: Volume::from_fn([8, 8, 4, 1], |x, y, t, c| base.get(x, y, 3 - t, c)),
            location: [0.5, 0.5, 0.5],
            clipped: false,
        };
        let a = extract_lop(&patch, &model, &cfg).unwrap();
        let b = extract_lop(&permuted, &model, &cfg).unwrap();
        let diff: f32 = a
            .values
            .iter()
            .zip(b.values.iter())
            .map(|(x, y)| (x - y).abs())
            .sum();
        assert!(diff > 1e-3, "projection should generally see frame order, diff {diff}");
    }

    #[test]
    fn single_frame_cell_pooling_is_identity() {
        let model = trained_model(11, 3 * 3 * 2, 2);
        let cfg = StreamConfig {
            stream: Stream::Motion,
            cell_grid: (1, 1, 1),
            structure: TemporalStructure::Pooling {
                op: TemporalPool::Mean,
            },
            mode: FeatureMode::IsaPlus,
        };
        let patch = patch_from_fn([3, 3, 1, 2], |x, y, _, c| (x + y + c) as f32 * 0.2);
        let d = extract_lof(&patch, &model, &cfg).unwrap();
        let direct = isa_plus_extract(&model, patch.volume.data()).unwrap();
        assert_eq!(d.values, direct);
    }

    #[test]
    fn mean_pooling_matches_naive_loop() {
        let model = trained_model(13, 3 * 3 * 2, 2);
        let cfg = StreamConfig {
            stream: Stream::Motion,
            cell_grid: (1, 1, 1),
            structure: TemporalStructure::Pooling {
                op: TemporalPool::Mean,
            },
            mode: FeatureMode::IsaPlus,
        };
        let mut r = rng::seeded(14);
        let patch = patch_from_fn([3, 3, 5, 2], |_, _, _, _| rng::normal_f32(&mut r));
        let d = extract_lof(&patch, &model, &cfg).unwrap();
        let mut naive = [0.0f64; 4];
        for t in 0..5 {
            let frame = patch.volume.time_slice(t, t + 1).unwrap();
            let f = isa_plus_extract(&model, frame.data()).unwrap();
            for (n, v) in naive.iter_mut().zip(f.iter()) {
                *n += *v as f64;
            }
        }
        for (a, b) in d.values.iter().zip(naive.iter()) {
            assert!((*a as f64 - b / 5.0).abs() < 1e-6);
        }
    }

    #[test]
    fn dimension_mismatch_names_both_sides() {
        let model = trained_model(15, 3 * 3 * 2, 2);
        let cfg = StreamConfig {
            stream: Stream::Motion,
            cell_grid: (1, 1, 1),
            structure: TemporalStructure::Pooling {
                op: TemporalPool::Mean,
            },
            mode: FeatureMode::IsaPlus,
        };
        let patch = patch_from_fn([4, 4, 2, 2], |_, _, _, _| 0.0);
        match extract_lof(&patch, &model, &cfg) {
            Err(Error::ShapeMismatch { expected, got }) => {
                assert!(expected.contains("32"), "{expected}");
                assert!(got.contains("18"), "{got}");
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn static_patches_correlate_perfectly() {
        let patch = patch_from_fn([4, 4, 5, 1], |x, y, _, _| (x * 3 + y) as f32);
        let r = temporal_correlation(&[patch]).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sign_flipped_frames_anticorrelate() {
        let patch = patch_from_fn([4, 4, 4, 1], |x, y, t, _| {
            let v = (x as f32 - 1.5) + 0.5 * (y as f32 - 1.5);
            if t % 2 == 0 {
                v
            } else {
                -v
            }
        });
        let r = temporal_correlation(&[patch]).unwrap();
        assert!((r + 1.0).abs() < 1e-9);
    }

    #[test]
    fn independent_frames_decorrelate() {
        let mut rr = rng::seeded(19);
        let patches: Vec<TrajectoryPatch> = (0..40)
            .map(|_| patch_from_fn([8, 8, 6, 1], |_, _, _, _| rng::normal_f32(&mut rr)))
            .collect();
        let r = temporal_correlation(&patches).unwrap();
        assert!(r.abs() < 0.05, "correlation {r}");
    }

    #[test]
    fn all_constant_patches_are_degenerate() {
        let patch = patch_from_fn([4, 4, 3, 1], |_, _, _, _| 0.7);
        assert!(temporal_correlation(&[patch]).is_err());
    }
}
