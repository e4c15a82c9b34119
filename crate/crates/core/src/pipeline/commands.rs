//! File-level command implementations behind the CLI: each validates its
//! inputs, runs deterministically for a given seed, and writes outputs plus
//! the resolved config and a run manifest into its output directory.

use super::stages::{
    self, classify_and_eval, encode_clip_block, encode_dataset, fit_kind_encoder, Codebook,
    ClipData, CodebookModel, KindEncoder,
};
use super::{DatasetEntry, DatasetIndex, PipelineConfig, RunManifest};
use crate::error::{Error, Result};
use crate::handcrafted::{read_cdsc_file, write_cdsc_file, DescriptorKind, IdtDescriptor};
use crate::isa::viz::{filter_gallery, filter_spectrum, pca_raw_filters, raw_space_filters, FilterLayout};
use crate::isa::{read_cisa_file, read_cpca_file, write_cisa_file, write_cpca_file, train_isa};
use crate::tensor::{read_cvol_file, write_cvol_file};
use crate::two_stream::{temporal_correlation, Stream, StreamConfig};
use crate::video::{
    estimate_flow_stack, generate_synth_dataset, load_video, save_trajectories, save_video,
    track_trajectories, VideoClip,
};
use crate::encode::{
    read_cgmm_file, read_ckms_file, read_cmat_file, write_cgmm_file, write_ckms_file,
    write_cmat_file, write_csvm_file,
};
use std::path::{Path, PathBuf};
use std::time::Instant;

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Sorted .cvid files of a dataset directory; prefers the index when
/// present so ordering matches generation order.
pub fn dataset_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join("index.json").exists() {
        let index = DatasetIndex::read(dir)?;
        return Ok(index.clips.iter().map(|e| dir.join(&e.file)).collect());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "cvid"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::format(dir, "no .cvid clips found"));
    }
    Ok(files)
}

pub fn load_dataset(dir: &Path) -> Result<Vec<VideoClip>> {
    dataset_files(dir)?.iter().map(|p| load_video(p)).collect()
}

/// Generates the synthetic benchmark into `out_dir/train` and
/// `out_dir/test`.
pub fn cmd_synth(cfg: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let started = Instant::now();
    cfg.validate()?;
    let (train, test) = generate_synth_dataset(&cfg.synth)?;
    for (split, clips) in [("train", &train), ("test", &test)] {
        let dir = out_dir.join(split);
        ensure_dir(&dir)?;
        let mut index = DatasetIndex { clips: Vec::new() };
        for (i, clip) in clips.iter().enumerate() {
            let name = format!("clip_{i:04}.cvid");
            save_video(&dir.join(&name), clip)?;
            index.clips.push(DatasetEntry {
                file: name,
                label: clip.label,
            });
        }
        index.write(&dir)?;
    }
    cfg.write_resolved(out_dir)?;
    RunManifest::new("synth").write(out_dir, started)
}

/// Estimates flow stacks for one clip or every clip of a directory,
/// written as CVOL volumes with C = 2.
pub fn cmd_flow(cfg: &PipelineConfig, video_in: &Path, flow_out: &Path) -> Result<()> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("flow");
    manifest.add_input(video_in)?;
    if video_in.is_dir() {
        ensure_dir(flow_out)?;
        for file in dataset_files(video_in)? {
            let clip = load_video(&file)?;
            let flows = estimate_flow_stack(&clip.frames, &cfg.flow)?;
            let stem = file.file_stem().unwrap_or_default().to_string_lossy();
            write_cvol_file(&flow_out.join(format!("{stem}.flow.cvol")), &flows)?;
        }
        cfg.write_resolved(flow_out)?;
        manifest.write(flow_out, started)
    } else {
        let clip = load_video(video_in)?;
        let flows = estimate_flow_stack(&clip.frames, &cfg.flow)?;
        if let Some(parent) = flow_out.parent() {
            if !parent.as_os_str().is_empty() {
                ensure_dir(parent)?;
            }
        }
        write_cvol_file(flow_out, &flows)?;
        Ok(())
    }
}

fn flow_file_for(flows_dir: &Path, video_file: &Path) -> PathBuf {
    let stem = video_file.file_stem().unwrap_or_default().to_string_lossy();
    flows_dir.join(format!("{stem}.flow.cvol"))
}

/// Tracks trajectories of one clip against its flow stack.
pub fn cmd_track(cfg: &PipelineConfig, video: &Path, flows: &Path, out: &Path) -> Result<()> {
    let clip = load_video(video)?;
    let flow_stack = read_cvol_file(flows)?;
    let trajectories = track_trajectories(&clip, &flow_stack, &cfg.track)?;
    save_trajectories(out, &trajectories)
}

fn parse_stream(stream: &str) -> Result<Stream> {
    match stream {
        "appearance" | "pixels" => Ok(Stream::Appearance),
        "motion" | "flow" => Ok(Stream::Motion),
        other => Err(Error::invalid(
            "stream",
            format!("unknown stream `{other}`, expected appearance|motion"),
        )),
    }
}

fn stream_config_for(cfg: &PipelineConfig, stream: Stream) -> StreamConfig {
    match stream {
        Stream::Appearance => cfg.appearance,
        Stream::Motion => cfg.motion,
    }
}

/// Loads clips + flows and rebuilds per-clip tracking, reusing stage logic.
fn prepare_from_dirs(cfg: &PipelineConfig, videos: &Path, flows_dir: &Path) -> Result<Vec<ClipData>> {
    use crate::rng;
    let files = dataset_files(videos)?;
    files
        .iter()
        .enumerate()
        .map(|(idx, file)| {
            let clip = load_video(file)?;
            let flow_path = flow_file_for(flows_dir, file);
            let flows = read_cvol_file(&flow_path)?;
            let trajectories = track_trajectories(&clip, &flows, &cfg.track)?;
            let mut r = rng::derive(cfg.seed, 0x7261_6a00 + idx as u64);
            let trajectories = stages::reservoir_sample(
                trajectories,
                cfg.encode.max_trajectories_per_clip,
                &mut r,
            );
            Ok(ClipData {
                clip,
                flows,
                trajectories,
            })
        })
        .collect()
}

/// Trains a filter model for one stream from a dataset directory and
/// writes the CISA file. The feature variant (PCA / ISA / ISA+) is chosen
/// at extraction time; a `pca` variant trains with zero epochs since only
/// the whitening is used.
pub fn cmd_train_filters(
    cfg: &PipelineConfig,
    videos: &Path,
    flows_dir: &Path,
    stream: &str,
    variant: &str,
    model_out: &Path,
) -> Result<()> {
    let stream = parse_stream(stream)?;
    let stream_cfg = stream_config_for(cfg, stream);
    let clips = prepare_from_dirs(cfg, videos, flows_dir)?;
    let rows = stages::harvest_training_rows(
        &clips,
        &stream_cfg,
        cfg.patch_size,
        cfg.encode.train_samples,
        cfg.seed,
    )?;
    let mut isa_cfg = cfg.isa.clone();
    if variant == "pca" {
        isa_cfg.epochs = 1;
    }
    let model = train_isa(&rows, &isa_cfg)?;
    if model.pca.rank_deficient {
        eprintln!(
            "warning: rank-deficient covariance (smallest kept eigenvalue below the whitening \
             regularizer); proceeding with regularization"
        );
    }
    if let Some(parent) = model_out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_cisa_file(model_out, &model)
}

/// Extracts descriptors of one kind for every clip in a dataset directory,
/// one CDSC file per clip.
pub fn cmd_extract(
    cfg: &PipelineConfig,
    videos: &Path,
    flows_dir: &Path,
    model: Option<&Path>,
    kind: DescriptorKind,
    out_dir: &Path,
) -> Result<()> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("extract");
    manifest.add_input(videos)?;
    manifest.add_input(flows_dir)?;
    ensure_dir(out_dir)?;

    let clips = prepare_from_dirs(cfg, videos, flows_dir)?;
    let files = dataset_files(videos)?;

    let learned = matches!(kind, DescriptorKind::Lop | DescriptorKind::Lof);
    let model = if learned {
        let path = model.ok_or_else(|| {
            Error::invalid("model", format!("kind {} needs a trained model", kind.name()))
        })?;
        manifest.add_input(path)?;
        Some(read_cisa_file(path)?)
    } else {
        None
    };

    for (data, file) in clips.iter().zip(files.iter()) {
        let descs = if let Some(model) = &model {
            let stream_cfg = match kind {
                DescriptorKind::Lop => cfg.appearance,
                _ => cfg.motion,
            };
            stages::learned_descriptors(data, model, &stream_cfg, cfg.patch_size)?
        } else {
            stages::handcrafted_clip_descriptors(data, kind, &cfg.idt, cfg.patch_size)?
        };
        let stem = file.file_stem().unwrap_or_default().to_string_lossy();
        write_cdsc_file(
            &out_dir.join(format!("{stem}.{}.cdsc", kind.name())),
            kind,
            &descs,
        )?;
    }
    cfg.write_resolved(out_dir)?;
    manifest.write(out_dir, started)
}

fn cdsc_files(dir: &Path, kind: DescriptorKind) -> Result<Vec<PathBuf>> {
    let suffix = format!(".{}.cdsc", kind.name());
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().ends_with(&suffix)))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::format(dir, format!("no *{suffix} files found")));
    }
    Ok(files)
}

fn read_kind_descriptors(dir: &Path, kind: DescriptorKind) -> Result<Vec<Vec<IdtDescriptor>>> {
    cdsc_files(dir, kind)?
        .iter()
        .map(|p| {
            let (file_kind, rows) = read_cdsc_file(p)?;
            if file_kind != kind {
                return Err(Error::format(
                    p,
                    format!("expected kind {}, found {}", kind.name(), file_kind.name()),
                ));
            }
            Ok(rows)
        })
        .collect()
}

fn encoder_paths(model_dir: &Path, kind: DescriptorKind) -> (PathBuf, PathBuf, PathBuf) {
    (
        model_dir.join(format!("{}.cgmm", kind.name())),
        model_dir.join(format!("{}.ckms", kind.name())),
        model_dir.join(format!("{}.cpca", kind.name())),
    )
}

/// Encodes per-clip descriptor files into one matrix row per clip.
///
/// With `fit_models`, codebooks (and the halving PCA) are fitted on these
/// descriptors and written under `model_dir`; otherwise they are loaded
/// from it, so train and test splits share one encoding.
#[allow(clippy::too_many_arguments)]
pub fn cmd_encode(
    cfg: &PipelineConfig,
    descriptor_dir: &Path,
    kinds: &[DescriptorKind],
    codebook: Codebook,
    model_dir: &Path,
    fit_models: bool,
    labels: Option<&[Option<u32>]>,
    encoded_out: &Path,
) -> Result<()> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("encode");
    manifest.add_input(descriptor_dir)?;
    if kinds.is_empty() {
        return Err(Error::invalid("kinds", "need at least one descriptor kind"));
    }

    let mut descs_by_kind = Vec::new();
    for &kind in kinds {
        descs_by_kind.push((kind, read_kind_descriptors(descriptor_dir, kind)?));
    }
    let n_clips = descs_by_kind[0].1.len();

    let mut encoders = Vec::new();
    if fit_models {
        ensure_dir(model_dir)?;
        for (kind, descs) in &descs_by_kind {
            let encoder = fit_kind_encoder(*kind, descs, codebook, &cfg.encode, cfg.seed)?;
            let (gmm_path, ckms_path, cpca_path) = encoder_paths(model_dir, *kind);
            match &encoder.model {
                CodebookModel::Gmm(gmm) => write_cgmm_file(&gmm_path, gmm)?,
                CodebookModel::Centroids(c) => write_ckms_file(&ckms_path, c)?,
            }
            if let Some(pca) = &encoder.reduce {
                write_cpca_file(&cpca_path, pca)?;
            }
            encoders.push(encoder);
        }
    } else {
        for &kind in kinds {
            let (gmm_path, ckms_path, cpca_path) = encoder_paths(model_dir, kind);
            let model = match codebook {
                Codebook::Fv => CodebookModel::Gmm(read_cgmm_file(&gmm_path)?),
                Codebook::Bow => CodebookModel::Centroids(read_ckms_file(&ckms_path)?),
            };
            let reduce = if cpca_path.exists() {
                Some(read_cpca_file(&cpca_path)?)
            } else {
                None
            };
            encoders.push(KindEncoder {
                kind,
                reduce,
                model,
            });
        }
    }

    let rows = encode_dataset(&descs_by_kind, &encoders, &cfg.encode)?;
    let labels: Vec<Option<u32>> = match labels {
        Some(l) => {
            if l.len() != n_clips {
                return Err(Error::ShapeMismatch {
                    expected: format!("{n_clips} labels"),
                    got: format!("{}", l.len()),
                });
            }
            l.to_vec()
        }
        None => vec![None; n_clips],
    };
    if let Some(parent) = encoded_out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_cmat_file(encoded_out, &rows, &labels)?;
    if encoded_out.parent().is_some_and(|p| p.is_dir()) {
        manifest.write(encoded_out.parent().unwrap(), started)?;
    }
    Ok(())
}

/// Trains the SVM on the train matrix, evaluates on the test matrix, and
/// writes metrics (text + JSON), the confusion matrix, and the model.
pub fn cmd_classify(
    cfg: &PipelineConfig,
    train_mat: &Path,
    test_mat: &Path,
    out_dir: &Path,
) -> Result<()> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("classify");
    manifest.add_input(train_mat)?;
    manifest.add_input(test_mat)?;
    ensure_dir(out_dir)?;

    let (train_x, train_labels) = read_cmat_file(train_mat)?;
    let (test_x, test_labels) = read_cmat_file(test_mat)?;
    let unwrap_labels = |labels: Vec<Option<u32>>, what: &str| -> Result<Vec<u32>> {
        labels
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                l.ok_or_else(|| Error::invalid("labels", format!("{what} row {i} has no label")))
            })
            .collect()
    };
    let train_y = unwrap_labels(train_labels, "train")?;
    let test_y = unwrap_labels(test_labels, "test")?;

    let (model, report) = classify_and_eval(&train_x, &train_y, &test_x, &test_y, cfg.svm.c, cfg.seed)?;
    write_csvm_file(&out_dir.join("model.csvm"), &model)?;
    std::fs::write(out_dir.join("metrics.txt"), report.render_text())
        .map_err(|e| Error::io(out_dir.join("metrics.txt"), e))?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("serialize metrics: {e}")))?;
    std::fs::write(out_dir.join("metrics.json"), json)
        .map_err(|e| Error::io(out_dir.join("metrics.json"), e))?;
    cfg.write_resolved(out_dir)?;
    manifest.write(out_dir, started)
}

/// Renders the filter gallery and spectrum figures of a trained model.
pub fn cmd_visualize(model_path: &Path, layout: FilterLayout, out_dir: &Path) -> Result<()> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("visualize");
    manifest.add_input(model_path)?;
    ensure_dir(out_dir)?;

    let model = read_cisa_file(model_path)?;
    let isa_filters = raw_space_filters(&model);
    let pca_filters = pca_raw_filters(&model.pca);
    for (name, filters) in [("isa", &isa_filters), ("pca", &pca_filters)] {
        let gallery = filter_gallery(filters, layout)?;
        gallery.write_png(&out_dir.join(format!("{name}_filters.png")))?;
        gallery.write_pgm(&out_dir.join(format!("{name}_filters.pgm")))?;
        let spectrum = filter_spectrum(filters, layout)?;
        spectrum.write_png(&out_dir.join(format!("{name}_spectrum.png")))?;
        spectrum.write_pgm(&out_dir.join(format!("{name}_spectrum.pgm")))?;
    }
    manifest.write(out_dir, started)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CorrelationReport {
    pub pixel_correlation: f64,
    pub flow_correlation: f64,
}

/// Measures the temporal correlation of pixel patches versus flow patches
/// sampled along the same trajectories.
pub fn cmd_correlation(
    cfg: &PipelineConfig,
    videos: &Path,
    flows_dir: &Path,
    out_dir: &Path,
) -> Result<CorrelationReport> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("correlation");
    manifest.add_input(videos)?;
    manifest.add_input(flows_dir)?;
    ensure_dir(out_dir)?;

    let clips = prepare_from_dirs(cfg, videos, flows_dir)?;
    let mut pixel = Vec::new();
    let mut flow = Vec::new();
    for data in &clips {
        pixel.extend(stages::pixel_patches(data, cfg.patch_size)?);
        flow.extend(stages::flow_patches(data, cfg.patch_size)?);
    }
    let report = CorrelationReport {
        pixel_correlation: temporal_correlation(&pixel)?,
        flow_correlation: temporal_correlation(&flow)?,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("serialize report: {e}")))?;
    std::fs::write(out_dir.join("correlation.json"), &json)
        .map_err(|e| Error::io(out_dir.join("correlation.json"), e))?;
    std::fs::write(
        out_dir.join("correlation.txt"),
        format!(
            "pixel temporal correlation: {:.4}\nflow temporal correlation:  {:.4}\n",
            report.pixel_correlation, report.flow_correlation
        ),
    )
    .map_err(|e| Error::io(out_dir.join("correlation.txt"), e))?;
    cfg.write_resolved(out_dir)?;
    manifest.write(out_dir, started)?;
    Ok(report)
}

/// Ensures a clip's descriptors can be encoded: used by encode paths that
/// must keep widths consistent for empty clips.
pub fn block_width_of(encoder: &KindEncoder, cfg: &PipelineConfig) -> usize {
    encode_clip_block(&[], encoder, &cfg.encode)
        .map(|b| b.len())
        .unwrap_or(0)
}
