//! In-process pipeline stages: flow, tracking, patch sampling, training-set
//! harvesting, descriptor extraction, encoding, classification.
//!
//! Every stage is deterministic given the config seed: per-clip work is
//! parallel with outputs ordered by clip index, and all sampling draws from
//! streams derived from (seed, clip index).

use super::{EncodeConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::handcrafted::{
    hof_descriptor, hog_descriptor, mbh_descriptors, trajectory_descriptor, DescriptorKind,
    IdtDescriptor, IdtNetConfig,
};
use crate::isa::{fit_pca, train_isa, IsaModel, PcaModel};
use crate::rng::{self, SeededRng};
use crate::tensor::Volume;
use crate::two_stream::{
    build_cell_grid, extract_descriptor, Stream, StreamConfig, TemporalStructure, TrajectoryPatch,
};
use crate::video::{
    estimate_flow_stack, sample_patch, track_trajectories, Trajectory, VideoClip,
};
use crate::encode::{
    bow_histogram_normalized, fisher_vector_with_weight_block, fit_gmm, fit_kmeans, mean_accuracy,
    predict, train_svm, EncodedVideo, GmmModel, GmmTrainOpts, SvmModel, SvmTrainOpts,
};
use rayon::prelude::*;

/// One clip with its estimated flow stack and surviving trajectories.
pub struct ClipData {
    pub clip: VideoClip,
    pub flows: Volume,
    pub trajectories: Vec<Trajectory>,
}

/// Seeded reservoir sample preserving first-seen order for kept items.
pub fn reservoir_sample<T>(items: Vec<T>, budget: usize, rng: &mut SeededRng) -> Vec<T> {
    use rand::Rng;
    if budget == 0 || items.len() <= budget {
        return items;
    }
    let mut kept_idx: Vec<usize> = (0..budget).collect();
    for i in budget..items.len() {
        let j = rng.gen_range(0..=i);
        if j < budget {
            kept_idx[j] = i;
        }
    }
    kept_idx.sort_unstable();
    let mut kept_flags = vec![false; items.len()];
    for &i in &kept_idx {
        kept_flags[i] = true;
    }
    items
        .into_iter()
        .zip(kept_flags)
        .filter_map(|(item, keep)| keep.then_some(item))
        .collect()
}

/// Flow + tracking + per-clip trajectory budget for every clip, in order.
pub fn prepare_clips(clips: &[VideoClip], cfg: &PipelineConfig) -> Result<Vec<ClipData>> {
    clips
        .par_iter()
        .enumerate()
        .map(|(idx, clip)| {
            let flows = estimate_flow_stack(&clip.frames, &cfg.flow)?;
            let trajectories = track_trajectories(clip, &flows, &cfg.track)?;
            let mut r = rng::derive(cfg.seed, 0x7261_6a00 + idx as u64);
            let trajectories = reservoir_sample(
                trajectories,
                cfg.encode.max_trajectories_per_clip,
                &mut r,
            );
            Ok(ClipData {
                clip: clip.clone(),
                flows,
                trajectories,
            })
        })
        .collect()
}

/// Trajectory-aligned pixel patches of one clip.
pub fn pixel_patches(data: &ClipData, patch_size: usize) -> Result<Vec<TrajectoryPatch>> {
    let dims = data.clip.dims();
    data.trajectories
        .iter()
        .map(|t| sample_patch(&data.clip.frames, t, patch_size, dims))
        .collect()
}

/// Trajectory-aligned flow patches of one clip.
pub fn flow_patches(data: &ClipData, patch_size: usize) -> Result<Vec<TrajectoryPatch>> {
    let dims = data.clip.dims();
    data.trajectories
        .iter()
        .map(|t| sample_patch(&data.flows, t, patch_size, dims))
        .collect()
}

fn patches_for_stream(data: &ClipData, stream: Stream, patch_size: usize) -> Result<Vec<TrajectoryPatch>> {
    match stream {
        Stream::Appearance => pixel_patches(data, patch_size),
        Stream::Motion => flow_patches(data, patch_size),
    }
}

/// Flattened model-input rows harvested from a clip's patches under one
/// stream config: stacks for projection, single frames for pooling.
pub fn training_rows_from_patches(
    patches: &[TrajectoryPatch],
    cfg: &StreamConfig,
) -> Result<Vec<Vec<f32>>> {
    let mut rows = Vec::new();
    for patch in patches {
        for cell in build_cell_grid(patch, cfg.cell_grid)? {
            let ct = cell.nt();
            match cfg.structure {
                TemporalStructure::Projection { stack_len } => {
                    if ct % stack_len != 0 {
                        return Err(Error::invalid(
                            "stack_len",
                            format!("stack length {stack_len} does not divide cell extent {ct}"),
                        ));
                    }
                    for s in 0..ct / stack_len {
                        rows.push(cell.time_slice(s * stack_len, (s + 1) * stack_len)?.into_data());
                    }
                }
                TemporalStructure::Pooling { .. } => {
                    for t in 0..ct {
                        rows.push(cell.time_slice(t, t + 1)?.into_data());
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Harvests a training set for filter learning across clips, reservoir
/// sampled to `budget` rows.
pub fn harvest_training_rows(
    clips: &[ClipData],
    stream_cfg: &StreamConfig,
    patch_size: usize,
    budget: usize,
    seed: u64,
) -> Result<Vec<Vec<f32>>> {
    let per_clip: Vec<Vec<Vec<f32>>> = clips
        .par_iter()
        .map(|data| {
            let patches = patches_for_stream(data, stream_cfg.stream, patch_size)?;
            training_rows_from_patches(&patches, stream_cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f32>> = per_clip.into_iter().flatten().collect();
    if rows.is_empty() {
        return Err(Error::Degenerate(
            "no training rows harvested: no trajectories survived".into(),
        ));
    }
    let mut r = rng::derive(seed, 0x6861_7276);
    Ok(reservoir_sample(rows, budget, &mut r))
}

/// Trains the stream's filter model on harvested rows.
pub fn train_stream_model(
    clips: &[ClipData],
    stream_cfg: &StreamConfig,
    cfg: &PipelineConfig,
    budget: usize,
) -> Result<IsaModel> {
    let rows = harvest_training_rows(clips, stream_cfg, cfg.patch_size, budget, cfg.seed)?;
    train_isa(&rows, &cfg.isa)
}

/// Learned (LOP/LOF-style) descriptors of one clip.
pub fn learned_descriptors(
    data: &ClipData,
    model: &IsaModel,
    stream_cfg: &StreamConfig,
    patch_size: usize,
) -> Result<Vec<IdtDescriptor>> {
    let patches = patches_for_stream(data, stream_cfg.stream, patch_size)?;
    patches
        .iter()
        .map(|p| extract_descriptor(p, model, stream_cfg))
        .collect()
}

/// Handcrafted descriptors of one clip for a given kind.
pub fn handcrafted_clip_descriptors(
    data: &ClipData,
    kind: DescriptorKind,
    idt: &IdtNetConfig,
    patch_size: usize,
) -> Result<Vec<IdtDescriptor>> {
    let dims = data.clip.dims();
    let mut out = Vec::with_capacity(data.trajectories.len());
    for traj in &data.trajectories {
        let desc = match kind {
            DescriptorKind::Hog => {
                let patch = sample_patch(&data.clip.frames, traj, patch_size, dims)?;
                IdtDescriptor::new(hog_descriptor(&patch.volume, idt)?, kind, patch.location)?
            }
            DescriptorKind::Hof => {
                let patch = sample_patch(&data.flows, traj, patch_size, dims)?;
                IdtDescriptor::new(hof_descriptor(&patch.volume, idt)?, kind, patch.location)?
            }
            DescriptorKind::Mbhx | DescriptorKind::Mbhy => {
                let patch = sample_patch(&data.flows, traj, patch_size, dims)?;
                let (mx, my) = mbh_descriptors(&patch.volume, idt)?;
                let values = if kind == DescriptorKind::Mbhx { mx } else { my };
                IdtDescriptor::new(values, kind, patch.location)?
            }
            DescriptorKind::Trajectory => match trajectory_descriptor(traj, dims) {
                Ok(d) => d,
                // static trajectories are filtered by tracking, but stay
                // defensive against zero-displacement numerics
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(e),
            },
            DescriptorKind::Lop | DescriptorKind::Lof => {
                return Err(Error::invalid(
                    "kind",
                    "learned kinds need a model; use learned_descriptors",
                ))
            }
        };
        out.push(desc);
    }
    Ok(out)
}

/// Codebook flavor for encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Codebook {
    Fv,
    Bow,
}

impl Codebook {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fv" | "fisher" => Some(Codebook::Fv),
            "bow" => Some(Codebook::Bow),
            _ => None,
        }
    }
}

/// Fitted per-kind encoder: optional halving PCA plus the codebook model.
pub struct KindEncoder {
    pub kind: DescriptorKind,
    pub reduce: Option<PcaModel>,
    pub model: CodebookModel,
}

pub enum CodebookModel {
    Gmm(GmmModel),
    Centroids(Vec<Vec<f32>>),
}

/// Reduced-and-augmented rows for encoding: PCA-halved values with the
/// normalized location appended.
pub fn encoding_rows(descs: &[IdtDescriptor], reduce: Option<&PcaModel>) -> Result<Vec<Vec<f32>>> {
    descs
        .iter()
        .map(|d| {
            let mut values = match reduce {
                Some(pca) => {
                    let y = pca.project(&d.values)?;
                    y.iter().map(|&v| v as f32).collect()
                }
                None => d.values.clone(),
            };
            values.extend_from_slice(&d.location);
            Ok(values)
        })
        .collect()
}

/// Fits one kind's encoder on the training clips' descriptors.
pub fn fit_kind_encoder(
    kind: DescriptorKind,
    train_descs: &[Vec<IdtDescriptor>],
    codebook: Codebook,
    cfg: &EncodeConfig,
    seed: u64,
) -> Result<KindEncoder> {
    let all: Vec<&IdtDescriptor> = train_descs.iter().flatten().collect();
    if all.is_empty() {
        return Err(Error::Degenerate(format!(
            "no {} descriptors to fit an encoder on",
            kind.name()
        )));
    }
    let dim = all[0].values.len();

    let reduce = if cfg.reduce_half && dim >= 4 {
        let target = dim / 2;
        let raw_rows: Vec<Vec<f32>> = all.iter().map(|d| d.values.clone()).collect();
        let mut r = rng::derive(seed, 0x7064_6300 + kind.tag() as u64);
        let sample = reservoir_sample(raw_rows, cfg.train_samples, &mut r);
        Some(fit_pca(&sample, target, false)?)
    } else {
        None
    };

    // rows in encoding space (reduced + location)
    let mut rows = Vec::with_capacity(all.len());
    for d in &all {
        let r = encoding_rows(std::slice::from_ref(*d), reduce.as_ref())?;
        rows.extend(r);
    }
    let mut r = rng::derive(seed, 0x636f_6400 + kind.tag() as u64);
    let sample = reservoir_sample(rows, cfg.train_samples, &mut r);

    let model = match codebook {
        Codebook::Fv => CodebookModel::Gmm(fit_gmm(
            &sample,
            cfg.codebook_size,
            seed ^ kind.tag() as u64,
            &GmmTrainOpts::default(),
        )?),
        Codebook::Bow => CodebookModel::Centroids(
            fit_kmeans(&sample, cfg.codebook_size, seed ^ kind.tag() as u64)?.centroids,
        ),
    };
    Ok(KindEncoder {
        kind,
        reduce,
        model,
    })
}

/// Encodes one clip's descriptors of one kind into an un-normalized block.
/// Clips with no descriptors yield a zero block of the right width.
pub fn encode_clip_block(
    descs: &[IdtDescriptor],
    encoder: &KindEncoder,
    cfg: &EncodeConfig,
) -> Result<Vec<f32>> {
    let width = match &encoder.model {
        CodebookModel::Gmm(gmm) => {
            2 * gmm.num_components() * gmm.dim()
                + if cfg.fv_weight_block {
                    gmm.num_components()
                } else {
                    0
                }
        }
        CodebookModel::Centroids(c) => c.len(),
    };
    if descs.is_empty() {
        return Ok(vec![0.0; width]);
    }
    let rows = encoding_rows(descs, encoder.reduce.as_ref())?;
    match &encoder.model {
        CodebookModel::Gmm(gmm) => {
            fisher_vector_with_weight_block(&rows, gmm, cfg.fv_weight_block)
        }
        CodebookModel::Centroids(centroids) => bow_histogram_normalized(&rows, centroids),
    }
}

/// Encodes every clip across the given kinds into final unit-norm vectors.
/// `descs_by_kind` holds, per kind, one descriptor list per clip (all kinds
/// over the same clip ordering).
pub fn encode_dataset(
    descs_by_kind: &[(DescriptorKind, Vec<Vec<IdtDescriptor>>)],
    encoders: &[KindEncoder],
    cfg: &EncodeConfig,
) -> Result<Vec<Vec<f32>>> {
    if descs_by_kind.is_empty() {
        return Err(Error::invalid("descriptors", "no kinds to encode"));
    }
    let n_clips = descs_by_kind[0].1.len();
    (0..n_clips)
        .into_par_iter()
        .map(|i| {
            let mut blocks = Vec::with_capacity(descs_by_kind.len());
            for ((kind, per_clip), encoder) in descs_by_kind.iter().zip(encoders.iter()) {
                if per_clip.len() != n_clips {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{n_clips} clips for every kind"),
                        got: format!("{} for {}", per_clip.len(), kind.name()),
                    });
                }
                blocks.push((*kind, encode_clip_block(&per_clip[i], encoder, cfg)?));
            }
            Ok(EncodedVideo::from_blocks(blocks, cfg.power_alpha)?.vector)
        })
        .collect()
}

/// Classification report: mean accuracy, per-class recalls, and the
/// confusion matrix over sorted class ids.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub mean_accuracy: f64,
    pub classes: Vec<u32>,
    pub per_class_recall: Vec<f64>,
    /// confusion[truth][predicted]
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("MAcc: {:.4}\n", self.mean_accuracy));
        for (class, recall) in self.classes.iter().zip(self.per_class_recall.iter()) {
            out.push_str(&format!("class {class}: recall {recall:.4}\n"));
        }
        out.push_str("confusion (rows = truth, cols = predicted):\n");
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:5}")).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Trains the one-vs-all SVM and evaluates on the test split.
pub fn classify_and_eval(
    train_x: &[Vec<f32>],
    train_y: &[u32],
    test_x: &[Vec<f32>],
    test_y: &[u32],
    c: f64,
    seed: u64,
) -> Result<(SvmModel, EvalReport)> {
    let model = train_svm(train_x, train_y, c, seed, &SvmTrainOpts::default())?;
    let preds: Vec<u32> = test_x
        .iter()
        .map(|x| predict(&model, x))
        .collect::<Result<Vec<_>>>()?;
    let macc = mean_accuracy(&preds, test_y)?;

    let mut classes: Vec<u32> = test_y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let class_index = |c: u32| classes.iter().position(|&x| x == c);
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    for (&p, &t) in preds.iter().zip(test_y.iter()) {
        if let (Some(ti), Some(pi)) = (class_index(t), class_index(p)) {
            confusion[ti][pi] += 1;
        }
    }
    let per_class_recall: Vec<f64> = classes
        .iter()
        .enumerate()
        .map(|(ti, _)| {
            let total: usize = confusion[ti].iter().sum();
            confusion[ti][ti] as f64 / total.max(1) as f64
        })
        .collect();
    Ok((
        model,
        EvalReport {
            mean_accuracy: macc,
            classes,
            per_class_recall,
            confusion,
        },
    ))
}

/// Labels of a clip list; every clip must be labeled.
pub fn labels_of(clips: &[VideoClip]) -> Result<Vec<u32>> {
    clips
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.label
                .ok_or_else(|| Error::invalid("clips", format!("clip {i} has no label")))
        })
        .collect()
}
