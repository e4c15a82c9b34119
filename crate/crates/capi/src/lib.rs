//! C ABI over the convisa toolkit.
//!
//! Conventions:
//! - Opaque handles (`ConvisaVolume`, `ConvisaClip`, `ConvisaIsaModel`) own
//!   their data; release them with the matching `_free` function.
//! - Every fallible call returns a [`ConvisaStatus`]; on failure the
//!   thread-local message from [`convisa_last_error`] describes the cause.
//! - Pipeline commands take a JSON pipeline config (NULL for defaults) and
//!   filesystem paths, mirroring the CLI subcommands.
//! - All strings are NUL-terminated UTF-8.

use convisa::error::Error;
use convisa::handcrafted::DescriptorKind;
use convisa::isa::viz::FilterLayout;
use convisa::isa::{isa_plus_extract, read_cisa_file, IsaModel};
use convisa::pipeline::{commands, Codebook, PipelineConfig};
use convisa::tensor::{read_cvol_file, write_cvol_file, Volume};
use convisa::video::{estimate_flow, load_video, save_video, FlowConfig, VideoClip};
use libc::{c_char, c_float, c_int, size_t};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

/// Call outcome. Mirrors the CLI exit codes for the shared error classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvisaStatus {
    Ok = 0,
    /// Invalid configuration or argument.
    Config = 2,
    /// Malformed or unreadable input data.
    Format = 3,
    /// Numerical failure (divergence, rank deficiency).
    Numerical = 4,
    /// A required pointer argument was NULL.
    NullArgument = 5,
    /// Internal panic; the library state is still consistent.
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> ConvisaStatus {
    match err.exit_code() {
        3 => ConvisaStatus::Format,
        4 => ConvisaStatus::Numerical,
        _ => ConvisaStatus::Config,
    }
}

fn run<F: FnOnce() -> Result<ConvisaStatus, Error>>(f: F) -> ConvisaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(err)) => {
            set_error(&err.to_string());
            status_of(&err)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(&msg);
            ConvisaStatus::Panic
        }
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, Error> {
    if ptr.is_null() {
        return Err(Error::invalid("pointer", "unexpected NULL string"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Error::invalid("string", "invalid UTF-8"))
}

unsafe fn path_of(ptr: *const c_char) -> Result<PathBuf, Error> {
    Ok(PathBuf::from(cstr(ptr)?))
}

unsafe fn config_of(json: *const c_char) -> Result<PipelineConfig, Error> {
    if json.is_null() {
        return Ok(PipelineConfig::default());
    }
    let text = cstr(json)?;
    let cfg: PipelineConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Message describing the most recent failure on this thread.
#[no_mangle]
pub extern "C" fn convisa_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn convisa_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Dense rank-4 volume of f32 samples indexed (x, y, t, c), x fastest.
pub struct ConvisaVolume(Volume);

/// Grayscale video clip with frame rate and optional label.
pub struct ConvisaClip(VideoClip);

/// Trained filter model: PCA whitening plus the ISA projection.
pub struct ConvisaIsaModel(IsaModel);

/// Creates a volume from a sample buffer of length nx*ny*nt*nc in x-fastest
/// order. Returns NULL on invalid input.
///
/// # Safety
/// `data` must point to `nx*ny*nt*nc` readable floats.
#[no_mangle]
pub unsafe extern "C" fn convisa_volume_create(
    nx: size_t,
    ny: size_t,
    nt: size_t,
    nc: size_t,
    data: *const c_float,
) -> *mut ConvisaVolume {
    let mut out: *mut ConvisaVolume = std::ptr::null_mut();
    run(|| {
        if data.is_null() {
            set_error("data is NULL");
            return Ok(ConvisaStatus::NullArgument);
        }
        let len = nx * ny * nt * nc;
        let slice = std::slice::from_raw_parts(data, len);
        let volume = Volume::from_vec([nx, ny, nt, nc], slice.to_vec())?;
        out = Box::into_raw(Box::new(ConvisaVolume(volume)));
        Ok(ConvisaStatus::Ok)
    });
    out
}

/// Reads a CVOL file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn convisa_volume_load(
    path: *const c_char,
    out: *mut *mut ConvisaVolume,
) -> ConvisaStatus {
    run(|| {
        if out.is_null() {
            set_error("out is NULL");
            return Ok(ConvisaStatus::NullArgument);
        }
        let volume = read_cvol_file(&path_of(path)?)?;
        *out = Box::into_raw(Box::new(ConvisaVolume(volume)));
        Ok(ConvisaStatus::Ok)
    })
}

/// Writes a CVOL file.
///
/// # Safety
/// `volume` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn convisa_volume_save(
    volume: *const ConvisaVolume,
    path: *const c_char,
) -> ConvisaStatus {
    run(|| {
        if volume.is_null() {
            set_error("volume is NULL");
            return Ok(ConvisaStatus::NullArgument);
        }
        write_cvol_file(&path_of(path)?, &(*volume).0)?;
        Ok(ConvisaStatus::Ok)
    })
}

/// Writes the four dims into `dims_out[0..4]`.
///
/// # Safety
/// `volume` must be a live handle; `dims_out` must hold 4 writable entries.
#[no_mangle]
pub unsafe extern "C" fn convisa_volume_dims(
    volume: *const ConvisaVolume,
    dims_out: *mut size_t,
) -> ConvisaStatus {
    run(|| {
        if volume.is_null() || dims_out.is_null() {
            set_error("volume or dims_out is NULL");
            return Ok(ConvisaStatus::NullArgument);
        }
        let dims = (*volume).0.dims();
        for (i, d) in dims.iter().enumerate() {
            *dims_out.add(i) = *d;
        }
        Ok(ConvisaStatus::Ok)
    })
}

/// Copies all samples into `data_out`, which must hold `len` floats
/// (nx*ny*nt*nc).
///
/// # Safety
/// `volume` must be a live handle; `data_out` must hold `len` floats.
#[no_mangle]
pub unsafe extern "C" fn convisa_volume_data(
    volume: *const ConvisaVolume,
    data_out: *mut c_float,
    len: size_t,
) -> ConvisaStatus {
    run(|| {
        if volume.is_null() || data_out.is_null() {
            set_error("volume or data_out is NULL");
            return Ok(ConvisaStatus::NullArgument);
        }
        let data = (*volume).0.data();
        if len != data.len() {
            return Err(Error::invalid(
                "len",
                format!("expected {}, got {len}", data.len()),
            ));
        }
        std::ptr::copy_nonoverlapping(data.as_ptr(), data_out, data.len());
        Ok(ConvisaStatus::Ok)
    })
}

/// # Safety
/// `volume` must come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn convisa_volume_free(volume: *mut ConvisaVolume) {
    if !volume.is_null() {
        drop(Box::from_raw(volume));
    }
}

/// Loads a CVID clip.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn convisa_clip_load(
    path: *const c_char,
    out: *mut *mut ConvisaClip,
) -> ConvisaStatus {
    run(|| {
        if out.is_null() {
            set_error("out is NULL");
            return Ok(ConvisaStatus::NullArgument);
        }
        let clip = load_video(&path_of(path)?)?;
        *out = Box::into_raw(Box::new(ConvisaClip(clip)));
        Ok(ConvisaStatus::Ok)
    })
}

/// Saves a CVID clip.
///
/// # Safety
/// `clip` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn convisa_clip_save(
    clip: *const ConvisaClip,
    path: *const c_char,
) -> ConvisaStatus {
    run(|| {
        if clip.is_null() {
            set_error("clip is NULL");
            return Ok(ConvisaStatus::NullArgument);
        }
        save_video(&path_of(path)?, &(*clip).0)?;
        Ok(ConvisaStatus::Ok)
    })
}

/// Class label of a clip, or -1 when unlabeled.
///
/// # Safety
/// `clip` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn convisa_clip_label(clip: *const ConvisaClip) -> c_int {
    if clip.is_null() {
        return -1;
    }
    (*clip).0.label.map(|l| l as c_int).unwrap_or(-1)
}

/// # Safety
/// `clip` must come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn convisa_clip_free(clip: *mut ConvisaClip) {
    if !clip.is_null() {
        drop(Box::from_raw(clip));
    }
}

/// Horn-Schunck flow between two single-frame volumes; writes a new
/// W x H x 1 x 2 volume handle into `out`.
///
/// # Safety
/// `a`, `b` must be live volume handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn convisa_estimate_flow(
    a: *const ConvisaVolume,
    b: *const ConvisaVolume,
    alpha: c_float,
    iterations: size_t,
    levels: size_t,
    warps: size_t,
    out: *mut *mut ConvisaVolume,
) -> ConvisaStatus {
    run(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            set_error("a, b or out is NULL");
            return Ok(ConvisaStatus::NullArgument);
        }
        let cfg = FlowConfig {
            alpha,
            iterations,
            levels,
            warps,
        };
        let flow = estimate_flow(&(*a).0, &(*b).0, &cfg)?;
        *out = Box::into_raw(Box::new(ConvisaVolume(flow)));
        Ok(ConvisaStatus::Ok)
    })
}

/// Loads a trained CISA model.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn convisa_model_load(
    path: *const c_char,
    out: *mut *mut ConvisaIsaModel,
) -> ConvisaStatus {
    run(|| {
        if out.is_null() {
            set_error("out is NULL");
            return Ok(ConvisaStatus::NullArgument);
        }
        let model = read_cisa_file(&path_of(path)?)?;
        *out = Box::into_raw(Box::new(ConvisaIsaModel(model)));
        Ok(ConvisaStatus::Ok)
    })
}

/// Raw input dimension the model expects.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn convisa_model_input_dim(model: *const ConvisaIsaModel) -> size_t {
    if model.is_null() {
        return 0;
    }
    (*model).0.raw_dim()
}

/// Output dimension `d`; the ISA+ feature is `2 * d` wide.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn convisa_model_output_dim(model: *const ConvisaIsaModel) -> size_t {
    if model.is_null() {
        return 0;
    }
    (*model).0.output_dim()
}

/// ISA+ feature of one raw input: top-d whitened PCA coefficients followed
/// by the d ISA activations. `input` holds `input_dim` floats; `out` must
/// hold `2 * output_dim` floats.
///
/// # Safety
/// `model` must be a live handle; the buffers must match the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn convisa_model_extract(
    model: *const ConvisaIsaModel,
    input: *const c_float,
    input_len: size_t,
    out: *mut c_float,
    out_len: size_t,
) -> ConvisaStatus {
    run(|| {
        if model.is_null() || input.is_null() || out.is_null() {
            set_error("model, input or out is NULL");
            return Ok(ConvisaStatus::NullArgument);
        }
        let model = &(*model).0;
        if input_len != model.raw_dim() {
            return Err(Error::invalid(
                "input_len",
                format!("expected {}, got {input_len}", model.raw_dim()),
            ));
        }
        if out_len != 2 * model.output_dim() {
            return Err(Error::invalid(
                "out_len",
                format!("expected {}, got {out_len}", 2 * model.output_dim()),
            ));
        }
        let x = std::slice::from_raw_parts(input, input_len);
        let features = isa_plus_extract(model, x)?;
        std::ptr::copy_nonoverlapping(features.as_ptr(), out, features.len());
        Ok(ConvisaStatus::Ok)
    })
}

/// # Safety
/// `model` must come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn convisa_model_free(model: *mut ConvisaIsaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// --- pipeline commands, mirroring the CLI subcommands -------------------

/// Generates the synthetic benchmark dataset under `out_dir`.
///
/// # Safety
/// Strings must be NUL-terminated; `config_json` may be NULL for defaults.
#[no_mangle]
pub unsafe extern "C" fn convisa_cmd_synth(
    config_json: *const c_char,
    out_dir: *const c_char,
) -> ConvisaStatus {
    run(|| {
        let cfg = config_of(config_json)?;
        commands::cmd_synth(&cfg, &path_of(out_dir)?)?;
        Ok(ConvisaStatus::Ok)
    })
}

/// Estimates flow for a clip file or a dataset directory.
///
/// # Safety
/// Strings must be NUL-terminated; `config_json` may be NULL for defaults.
#[no_mangle]
pub unsafe extern "C" fn convisa_cmd_flow(
    config_json: *const c_char,
    video_in: *const c_char,
    flow_out: *const c_char,
) -> ConvisaStatus {
    run(|| {
        let cfg = config_of(config_json)?;
        commands::cmd_flow(&cfg, &path_of(video_in)?, &path_of(flow_out)?)?;
        Ok(ConvisaStatus::Ok)
    })
}

/// Tracks dense trajectories of one clip.
///
/// # Safety
/// Strings must be NUL-terminated; `config_json` may be NULL for defaults.
#[no_mangle]
pub unsafe extern "C" fn convisa_cmd_track(
    config_json: *const c_char,
    video: *const c_char,
    flows: *const c_char,
    out: *const c_char,
) -> ConvisaStatus {
    run(|| {
        let cfg = config_of(config_json)?;
        commands::cmd_track(&cfg, &path_of(video)?, &path_of(flows)?, &path_of(out)?)?;
        Ok(ConvisaStatus::Ok)
    })
}

/// Learns filter banks for `stream` ("appearance" or "motion") with
/// `variant` ("pca", "isa" or "isa+").
///
/// # Safety
/// Strings must be NUL-terminated; `config_json` may be NULL for defaults.
#[no_mangle]
pub unsafe extern "C" fn convisa_cmd_train_filters(
    config_json: *const c_char,
    videos: *const c_char,
    flows: *const c_char,
    stream: *const c_char,
    variant: *const c_char,
    model_out: *const c_char,
) -> ConvisaStatus {
    run(|| {
        let cfg = config_of(config_json)?;
        commands::cmd_train_filters(
            &cfg,
            &path_of(videos)?,
            &path_of(flows)?,
            cstr(stream)?,
            cstr(variant)?,
            &path_of(model_out)?,
        )?;
        Ok(ConvisaStatus::Ok)
    })
}

/// Extracts descriptors of `kind` (hog|hof|mbhx|mbhy|traj|lop|lof) for
/// every clip; `model` may be NULL for handcrafted kinds.
///
/// # Safety
/// Strings must be NUL-terminated; `config_json`/`model` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn convisa_cmd_extract(
    config_json: *const c_char,
    videos: *const c_char,
    flows: *const c_char,
    model: *const c_char,
    kind: *const c_char,
    out_dir: *const c_char,
) -> ConvisaStatus {
    run(|| {
        let cfg = config_of(config_json)?;
        let kind = DescriptorKind::parse(cstr(kind)?)
            .ok_or_else(|| Error::Config("unknown descriptor kind".into()))?;
        let model_path = if model.is_null() {
            None
        } else {
            Some(path_of(model)?)
        };
        commands::cmd_extract(
            &cfg,
            &path_of(videos)?,
            &path_of(flows)?,
            model_path.as_deref(),
            kind,
            &path_of(out_dir)?,
        )?;
        Ok(ConvisaStatus::Ok)
    })
}

/// Encodes per-clip descriptors into a matrix. `kinds` is comma-separated;
/// `codebook` is "fv" or "bow"; with `fit` nonzero the codebooks are fitted
/// and written under `model_dir`, otherwise loaded from it.
///
/// # Safety
/// Strings must be NUL-terminated; `config_json` may be NULL for defaults.
#[no_mangle]
pub unsafe extern "C" fn convisa_cmd_encode(
    config_json: *const c_char,
    descriptor_dir: *const c_char,
    kinds: *const c_char,
    codebook: *const c_char,
    model_dir: *const c_char,
    fit: c_int,
    labels_dataset: *const c_char,
    encoded_out: *const c_char,
) -> ConvisaStatus {
    run(|| {
        let cfg = config_of(config_json)?;
        let kinds: Vec<DescriptorKind> = cstr(kinds)?
            .split(',')
            .map(|k| {
                DescriptorKind::parse(k.trim())
                    .ok_or_else(|| Error::Config(format!("unknown descriptor kind `{k}`")))
            })
            .collect::<Result<Vec<_>, Error>>()?;
        let codebook = Codebook::parse(cstr(codebook)?)
            .ok_or_else(|| Error::Config("unknown codebook".into()))?;
        let labels = if labels_dataset.is_null() {
            None
        } else {
            let dir = path_of(labels_dataset)?;
            let files = commands::dataset_files(&dir)?;
            Some(
                files
                    .iter()
                    .map(|p| Ok(load_video(p)?.label))
                    .collect::<Result<Vec<_>, Error>>()?,
            )
        };
        commands::cmd_encode(
            &cfg,
            &path_of(descriptor_dir)?,
            &kinds,
            codebook,
            &path_of(model_dir)?,
            fit != 0,
            labels.as_deref(),
            &path_of(encoded_out)?,
        )?;
        Ok(ConvisaStatus::Ok)
    })
}

/// Trains the SVM on the train matrix and writes metrics for the test
/// matrix under `out_dir`.
///
/// # Safety
/// Strings must be NUL-terminated; `config_json` may be NULL for defaults.
#[no_mangle]
pub unsafe extern "C" fn convisa_cmd_classify(
    config_json: *const c_char,
    train_mat: *const c_char,
    test_mat: *const c_char,
    out_dir: *const c_char,
) -> ConvisaStatus {
    run(|| {
        let cfg = config_of(config_json)?;
        commands::cmd_classify(&cfg, &path_of(train_mat)?, &path_of(test_mat)?, &path_of(out_dir)?)?;
        Ok(ConvisaStatus::Ok)
    })
}

/// Renders gallery and spectrum figures for a trained model whose filters
/// reshape to (nx, ny, nt, nc).
///
/// # Safety
/// Strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn convisa_cmd_visualize(
    model: *const c_char,
    nx: size_t,
    ny: size_t,
    nt: size_t,
    nc: size_t,
    out_dir: *const c_char,
) -> ConvisaStatus {
    run(|| {
        let layout = FilterLayout { nx, ny, nt, nc };
        commands::cmd_visualize(&path_of(model)?, layout, &path_of(out_dir)?)?;
        Ok(ConvisaStatus::Ok)
    })
}

/// Measures pixel-patch vs flow-patch temporal correlation over a dataset;
/// the two values are written to `pixel_out` and `flow_out`.
///
/// # Safety
/// Strings must be NUL-terminated; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn convisa_cmd_correlation(
    config_json: *const c_char,
    videos: *const c_char,
    flows: *const c_char,
    out_dir: *const c_char,
    pixel_out: *mut f64,
    flow_out: *mut f64,
) -> ConvisaStatus {
    run(|| {
        let cfg = config_of(config_json)?;
        let report =
            commands::cmd_correlation(&cfg, &path_of(videos)?, &path_of(flows)?, &path_of(out_dir)?)?;
        if !pixel_out.is_null() {
            *pixel_out = report.pixel_correlation;
        }
        if !flow_out.is_null() {
            *flow_out = report.flow_correlation;
        }
        Ok(ConvisaStatus::Ok)
    })
}
