#ifndef CONVISA_H
#define CONVISA_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome. Mirrors the CLI exit codes for the shared error classes.
 */
typedef enum ConvisaStatus {
  CONVISA_STATUS_OK = 0,
  /**
   * Invalid configuration or argument.
   */
  CONVISA_STATUS_CONFIG = 2,
  /**
   * Malformed or unreadable input data.
   */
  CONVISA_STATUS_FORMAT = 3,
  /**
   * Numerical failure (divergence, rank deficiency).
   */
  CONVISA_STATUS_NUMERICAL = 4,
  /**
   * A required pointer argument was NULL.
   */
  CONVISA_STATUS_NULL_ARGUMENT = 5,
  /**
   * Internal panic; the library state is still consistent.
   */
  CONVISA_STATUS_PANIC = 6,
} ConvisaStatus;

/**
 * Grayscale video clip with frame rate and optional label.
 */
typedef struct ConvisaClip ConvisaClip;

/**
 * Trained filter model: PCA whitening plus the ISA projection.
 */
typedef struct ConvisaIsaModel ConvisaIsaModel;

/**
 * Dense rank-4 volume of f32 samples indexed (x, y, t, c), x fastest.
 */
typedef struct ConvisaVolume ConvisaVolume;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread.
 */
const char *convisa_last_error(void);

/**
 * Library version as a static string.
 */
const char *convisa_version(void);

/**
 * Creates a volume from a sample buffer of length nx*ny*nt*nc in x-fastest
 * order. Returns NULL on invalid input.
 *
 * # Safety
 * `data` must point to `nx*ny*nt*nc` readable floats.
 */
struct ConvisaVolume *convisa_volume_create(size_t nx,
                                            size_t ny,
                                            size_t nt,
                                            size_t nc,
                                            const float *data);

/**
 * Reads a CVOL file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ConvisaStatus convisa_volume_load(const char *path, struct ConvisaVolume **out);

/**
 * Writes a CVOL file.
 *
 * # Safety
 * `volume` must be a live handle; `path` a NUL-terminated string.
 */
enum ConvisaStatus convisa_volume_save(const struct ConvisaVolume *volume, const char *path);

/**
 * Writes the four dims into `dims_out[0..4]`.
 *
 * # Safety
 * `volume` must be a live handle; `dims_out` must hold 4 writable entries.
 */
enum ConvisaStatus convisa_volume_dims(const struct ConvisaVolume *volume, size_t *dims_out);

/**
 * Copies all samples into `data_out`, which must hold `len` floats
 * (nx*ny*nt*nc).
 *
 * # Safety
 * `volume` must be a live handle; `data_out` must hold `len` floats.
 */
enum ConvisaStatus convisa_volume_data(const struct ConvisaVolume *volume,
                                       float *data_out,
                                       size_t len);

/**
 * # Safety
 * `volume` must come from this library and not already be freed.
 */
void convisa_volume_free(struct ConvisaVolume *volume);

/**
 * Loads a CVID clip.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ConvisaStatus convisa_clip_load(const char *path, struct ConvisaClip **out);

/**
 * Saves a CVID clip.
 *
 * # Safety
 * `clip` must be a live handle; `path` a NUL-terminated string.
 */
enum ConvisaStatus convisa_clip_save(const struct ConvisaClip *clip, const char *path);

/**
 * Class label of a clip, or -1 when unlabeled.
 *
 * # Safety
 * `clip` must be a live handle.
 */
int convisa_clip_label(const struct ConvisaClip *clip);

/**
 * # Safety
 * `clip` must come from this library and not already be freed.
 */
void convisa_clip_free(struct ConvisaClip *clip);

/**
 * Horn-Schunck flow between two single-frame volumes; writes a new
 * W x H x 1 x 2 volume handle into `out`.
 *
 * # Safety
 * `a`, `b` must be live volume handles; `out` must be writable.
 */
enum ConvisaStatus convisa_estimate_flow(const struct ConvisaVolume *a,
                                         const struct ConvisaVolume *b,
                                         float alpha,
                                         size_t iterations,
                                         size_t levels,
                                         size_t warps,
                                         struct ConvisaVolume **out);

/**
 * Loads a trained CISA model.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ConvisaStatus convisa_model_load(const char *path, struct ConvisaIsaModel **out);

/**
 * Raw input dimension the model expects.
 *
 * # Safety
 * `model` must be a live handle.
 */
size_t convisa_model_input_dim(const struct ConvisaIsaModel *model);

/**
 * Output dimension `d`; the ISA+ feature is `2 * d` wide.
 *
 * # Safety
 * `model` must be a live handle.
 */
size_t convisa_model_output_dim(const struct ConvisaIsaModel *model);

/**
 * ISA+ feature of one raw input: top-d whitened PCA coefficients followed
 * by the d ISA activations. `input` holds `input_dim` floats; `out` must
 * hold `2 * output_dim` floats.
 *
 * # Safety
 * `model` must be a live handle; the buffers must match the stated sizes.
 */
enum ConvisaStatus convisa_model_extract(const struct ConvisaIsaModel *model,
                                         const float *input,
                                         size_t input_len,
                                         float *out,
                                         size_t out_len);

/**
 * # Safety
 * `model` must come from this library and not already be freed.
 */
void convisa_model_free(struct ConvisaIsaModel *model);

/**
 * Generates the synthetic benchmark dataset under `out_dir`.
 *
 * # Safety
 * Strings must be NUL-terminated; `config_json` may be NULL for defaults.
 */
enum ConvisaStatus convisa_cmd_synth(const char *config_json, const char *out_dir);

/**
 * Estimates flow for a clip file or a dataset directory.
 *
 * # Safety
 * Strings must be NUL-terminated; `config_json` may be NULL for defaults.
 */
enum ConvisaStatus convisa_cmd_flow(const char *config_json,
                                    const char *video_in,
                                    const char *flow_out);

/**
 * Tracks dense trajectories of one clip.
 *
 * # Safety
 * Strings must be NUL-terminated; `config_json` may be NULL for defaults.
 */
enum ConvisaStatus convisa_cmd_track(const char *config_json,
                                     const char *video,
                                     const char *flows,
                                     const char *out);

/**
 * Learns filter banks for `stream` ("appearance" or "motion") with
 * `variant` ("pca", "isa" or "isa+").
 *
 * # Safety
 * Strings must be NUL-terminated; `config_json` may be NULL for defaults.
 */
enum ConvisaStatus convisa_cmd_train_filters(const char *config_json,
                                             const char *videos,
                                             const char *flows,
                                             const char *stream,
                                             const char *variant,
                                             const char *model_out);

/**
 * Extracts descriptors of `kind` (hog|hof|mbhx|mbhy|traj|lop|lof) for
 * every clip; `model` may be NULL for handcrafted kinds.
 *
 * # Safety
 * Strings must be NUL-terminated; `config_json`/`model` may be NULL.
 */
enum ConvisaStatus convisa_cmd_extract(const char *config_json,
                                       const char *videos,
                                       const char *flows,
                                       const char *model,
                                       const char *kind,
                                       const char *out_dir);

/**
 * Encodes per-clip descriptors into a matrix. `kinds` is comma-separated;
 * `codebook` is "fv" or "bow"; with `fit` nonzero the codebooks are fitted
 * and written under `model_dir`, otherwise loaded from it.
 *
 * # Safety
 * Strings must be NUL-terminated; `config_json` may be NULL for defaults.
 */
enum ConvisaStatus convisa_cmd_encode(const char *config_json,
                                      const char *descriptor_dir,
                                      const char *kinds,
                                      const char *codebook,
                                      const char *model_dir,
                                      int fit,
                                      const char *labels_dataset,
                                      const char *encoded_out);

/**
 * Trains the SVM on the train matrix and writes metrics for the test
 * matrix under `out_dir`.
 *
 * # Safety
 * Strings must be NUL-terminated; `config_json` may be NULL for defaults.
 */
enum ConvisaStatus convisa_cmd_classify(const char *config_json,
                                        const char *train_mat,
                                        const char *test_mat,
                                        const char *out_dir);

/**
 * Renders gallery and spectrum figures for a trained model whose filters
 * reshape to (nx, ny, nt, nc).
 *
 * # Safety
 * Strings must be NUL-terminated.
 */
enum ConvisaStatus convisa_cmd_visualize(const char *model,
                                         size_t nx,
                                         size_t ny,
                                         size_t nt,
                                         size_t nc,
                                         const char *out_dir);

/**
 * Measures pixel-patch vs flow-patch temporal correlation over a dataset;
 * the two values are written to `pixel_out` and `flow_out`.
 *
 * # Safety
 * Strings must be NUL-terminated; out pointers must be writable.
 */
enum ConvisaStatus convisa_cmd_correlation(const char *config_json,
                                           const char *videos,
                                           const char *flows,
                                           const char *out_dir,
                                           double *pixel_out,
                                           double *flow_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONVISA_H */
