//! Declarative pipeline configuration, run manifests, and the staged
//! in-process pipeline the CLI commands and the benchmark wrap.

pub mod commands;
pub mod stages;

pub use stages::*;

use crate::error::{Error, Result};
use crate::handcrafted::IdtNetConfig;
use crate::isa::IsaTrainConfig;
use crate::two_stream::StreamConfig;
use crate::video::{FlowConfig, SynthConfig, TrackConfig};
use std::path::{Path, PathBuf};

/// Everything a run needs, in one declarative document. Unknown keys are
/// rejected; missing sections fall back to defaults.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Master seed; stages derive their own streams from it.
    pub seed: u64,
    pub synth: SynthConfig,
    pub flow: FlowConfig,
    pub track: TrackConfig,
    /// Side of the square patch sampled around each trajectory.
    pub patch_size: usize,
    pub idt: IdtNetConfig,
    pub isa: IsaTrainConfig,
    pub appearance: StreamConfig,
    pub motion: StreamConfig,
    pub encode: EncodeConfig,
    pub svm: SvmConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            synth: SynthConfig::default(),
            flow: FlowConfig::default(),
            track: TrackConfig::default(),
            patch_size: 16,
            idt: IdtNetConfig {
                patch_size: 16,
                patch_len: 15,
                ..Default::default()
            },
            isa: IsaTrainConfig::default(),
            appearance: StreamConfig::lop_default(),
            motion: StreamConfig::lof_default(),
            encode: EncodeConfig::default(),
            svm: SvmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodeConfig {
    /// Gaussians (FV) or centroids (BoW).
    pub codebook_size: usize,
    /// Descriptor rows sampled for codebook/GMM fitting.
    pub train_samples: usize,
    /// Trajectories kept per clip (reservoir sampled); 0 keeps all.
    pub max_trajectories_per_clip: usize,
    pub power_alpha: f32,
    /// Adds the FV weight-gradient block.
    pub fv_weight_block: bool,
    /// Halve descriptor dimensionality with PCA before encoding.
    pub reduce_half: bool,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            codebook_size: 16,
            train_samples: 20000,
            max_trajectories_per_clip: 60,
            power_alpha: 0.5,
            fv_weight_block: false,
            reduce_half: true,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    pub c: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { c: 100.0 }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.isa.validate()?;
        if self.patch_size < 4 {
            return Err(Error::Config("patch_size must be >= 4".into()));
        }
        if self.encode.codebook_size == 0 {
            return Err(Error::Config("encode.codebook_size must be >= 1".into()));
        }
        if self.svm.c <= 0.0 {
            return Err(Error::Config("svm.c must be positive".into()));
        }
        Ok(())
    }

    /// Writes the fully-resolved config next to a run's outputs.
    pub fn write_resolved(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join("resolved_config.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("serialize config: {e}")))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// Run manifest: inputs with content hashes, the crate version, and wall
/// time. Written as `manifest.json` next to the outputs; the wall time
/// makes the manifest itself non-deterministic, artifact files stay
/// byte-identical across seeded reruns.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub inputs: std::collections::BTreeMap<String, String>,
    pub wall_time_ms: u128,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Default::default(),
            wall_time_ms: 0,
        }
    }

    /// Records a file or directory input as an FNV-1a content hash.
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let hash = hash_path(path)?;
        self.inputs
            .insert(path.display().to_string(), format!("{hash:016x}"));
        Ok(())
    }

    pub fn write(&self, out_dir: &Path, started: std::time::Instant) -> Result<()> {
        let manifest = RunManifest {
            wall_time_ms: started.elapsed().as_millis(),
            ..self.clone()
        };
        let path = out_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Config(format!("serialize manifest: {e}")))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// FNV-1a content hash of a file, or of a directory's sorted
/// (name, file-hash) pairs.
pub fn hash_path(path: &Path) -> Result<u64> {
    use crate::binio::fnv1a64;
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        let mut acc = Vec::new();
        for entry in entries {
            let name = entry.file_name().unwrap_or_default().to_string_lossy().into_owned();
            acc.extend_from_slice(name.as_bytes());
            acc.extend_from_slice(&hash_path(&entry)?.to_le_bytes());
        }
        Ok(fnv1a64(&acc))
    } else {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(fnv1a64(&bytes))
    }
}

/// Clip files and labels inside a dataset directory, as written by the
/// synth command: one `clip_NNNN.cvid` per clip plus `index.json`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DatasetIndex {
    pub clips: Vec<DatasetEntry>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DatasetEntry {
    pub file: String,
    pub label: Option<u32>,
}

impl DatasetIndex {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("index.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("serialize index: {e}")))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("index.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
