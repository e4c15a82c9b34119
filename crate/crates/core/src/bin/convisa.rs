//! Pipeline CLI: one subcommand per stage, a declarative JSON config, and
//! deterministic outputs (models, descriptors, encodings, metrics,
//! figures) written as files.
//!
//! Exit codes: 0 success, 2 config error, 3 input-format error,
//! 4 numerical failure. `CONVISA_THREADS` caps the worker thread count;
//! the default is all available cores.

use clap::{Args, Parser, Subcommand};
use convisa::error::Error;
use convisa::handcrafted::DescriptorKind;
use convisa::isa::viz::FilterLayout;
use convisa::pipeline::commands::{self, dataset_files};
use convisa::pipeline::{Codebook, DatasetIndex, PipelineConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "convisa", version, about = "Label-free video feature learning pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Pipeline config (JSON). Missing keys fall back to defaults;
    /// unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.synth.seed = seed;
            cfg.isa.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the seeded synthetic benchmark dataset.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory; receives train/ and test/ splits.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate optical flow for a clip (or every clip of a directory).
    Flow {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        video: PathBuf,
        /// Output .cvol file (single clip) or directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Track dense trajectories of one clip through its flow stack.
    Track {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        video: PathBuf,
        #[arg(long)]
        flows: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn filter banks (PCA whitening + ISA) for one stream.
    TrainFilters {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        videos: PathBuf,
        #[arg(long)]
        flows: PathBuf,
        /// appearance | motion
        #[arg(long)]
        stream: String,
        /// pca | isa | isa+ (extraction picks the feature; pca skips ISA
        /// epochs)
        #[arg(long, default_value = "isa+")]
        variant: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract descriptors (handcrafted or learned) for every clip.
    Extract {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        videos: PathBuf,
        #[arg(long)]
        flows: PathBuf,
        /// Trained model (.cisa), required for lop/lof.
        #[arg(long)]
        model: Option<PathBuf>,
        /// hog | hof | mbhx | mbhy | traj | lop | lof
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit codebooks and encode per-clip descriptors into a matrix.
    Encode {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        descriptors: PathBuf,
        /// Comma-separated descriptor kinds, concatenated in order.
        #[arg(long)]
        kinds: String,
        /// fv | bow
        #[arg(long, default_value = "fv")]
        codebook: String,
        /// Directory for codebook models (written with --fit, read
        /// otherwise).
        #[arg(long)]
        models: PathBuf,
        /// Fit codebooks on these descriptors (train split).
        #[arg(long)]
        fit: bool,
        /// Dataset directory whose index supplies per-clip labels.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the one-vs-all SVM and report metrics on the test matrix.
    Classify {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Overrides the SVM regularization constant.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render filter gallery and spectrum figures of a trained model.
    Visualize {
        #[arg(long)]
        model: PathBuf,
        /// Filter layout WxHxTxC, e.g. 8x8x5x1.
        #[arg(long)]
        shape: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure pixel-patch vs flow-patch temporal correlation.
    Correlation {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        videos: PathBuf,
        #[arg(long)]
        flows: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_shape(s: &str) -> Result<FilterLayout, Error> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Error::Config(format!("bad shape `{s}`, expected WxHxTxC")))?;
    match parts.as_slice() {
        [nx, ny, nt, nc] => Ok(FilterLayout {
            nx: *nx,
            ny: *ny,
            nt: *nt,
            nc: *nc,
        }),
        [nx, ny, nt] => Ok(FilterLayout {
            nx: *nx,
            ny: *ny,
            nt: *nt,
            nc: 1,
        }),
        _ => Err(Error::Config(format!("bad shape `{s}`, expected WxHxTxC"))),
    }
}

fn parse_kinds(s: &str) -> Result<Vec<DescriptorKind>, Error> {
    s.split(',')
        .map(|k| {
            DescriptorKind::parse(k.trim())
                .ok_or_else(|| Error::Config(format!("unknown descriptor kind `{k}`")))
        })
        .collect()
}

fn labels_from_index(dir: &std::path::Path) -> Result<Vec<Option<u32>>, Error> {
    let index = DatasetIndex::read(dir)?;
    Ok(index.clips.iter().map(|e| e.label).collect())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth { config, out } => {
            let cfg = config.resolve()?;
            commands::cmd_synth(&cfg, &out)
        }
        Command::Flow { config, video, out } => {
            let cfg = config.resolve()?;
            commands::cmd_flow(&cfg, &video, &out)
        }
        Command::Track {
            config,
            video,
            flows,
            out,
        } => {
            let cfg = config.resolve()?;
            commands::cmd_track(&cfg, &video, &flows, &out)
        }
        Command::TrainFilters {
            config,
            videos,
            flows,
            stream,
            variant,
            out,
        } => {
            let cfg = config.resolve()?;
            if !matches!(variant.as_str(), "pca" | "isa" | "isa+" | "isaplus") {
                return Err(Error::Config(format!(
                    "unknown variant `{variant}`, expected pca|isa|isa+"
                )));
            }
            commands::cmd_train_filters(&cfg, &videos, &flows, &stream, &variant, &out)
        }
        Command::Extract {
            config,
            videos,
            flows,
            model,
            kind,
            out,
        } => {
            let cfg = config.resolve()?;
            let kind = DescriptorKind::parse(&kind)
                .ok_or_else(|| Error::Config(format!("unknown descriptor kind `{kind}`")))?;
            commands::cmd_extract(&cfg, &videos, &flows, model.as_deref(), kind, &out)
        }
        Command::Encode {
            config,
            descriptors,
            kinds,
            codebook,
            models,
            fit,
            labels,
            out,
        } => {
            let cfg = config.resolve()?;
            let kinds = parse_kinds(&kinds)?;
            let codebook = Codebook::parse(&codebook)
                .ok_or_else(|| Error::Config(format!("unknown codebook `{codebook}`")))?;
            let labels = labels.map(|dir| labels_from_index(&dir)).transpose()?;
            commands::cmd_encode(
                &cfg,
                &descriptors,
                &kinds,
                codebook,
                &models,
                fit,
                labels.as_deref(),
                &out,
            )
        }
        Command::Classify {
            config,
            train,
            test,
            c,
            out,
        } => {
            let mut cfg = config.resolve()?;
            if let Some(c) = c {
                cfg.svm.c = c;
            }
            cfg.validate()?;
            commands::cmd_classify(&cfg, &train, &test, &out)
        }
        Command::Visualize { model, shape, out } => {
            let layout = parse_shape(&shape)?;
            commands::cmd_visualize(&model, layout, &out)
        }
        Command::Correlation {
            config,
            videos,
            flows,
            out,
        } => {
            let cfg = config.resolve()?;
            // validate early so missing datasets give a clean input error
            dataset_files(&videos)?;
            commands::cmd_correlation(&cfg, &videos, &flows, &out)?;
            Ok(())
        }
    }
}

fn init_threads() {
    if let Ok(value) = std::env::var("CONVISA_THREADS") {
        if let Ok(n) = value.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
