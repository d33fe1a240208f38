#ifndef LUNGPHASE_H
#define LUNGPHASE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define LP_INSPIRATION 0

#define LP_EXPIRATION 1

typedef enum LpStatus {
  LP_STATUS_OK = 0,
  LP_STATUS_NULL_POINTER = 1,
  LP_STATUS_INVALID_UTF8 = 2,
  LP_STATUS_UNSUPPORTED_ENCODING = 3,
  LP_STATUS_CORRUPT_HEADER = 4,
  LP_STATUS_EMPTY_AUDIO = 5,
  LP_STATUS_INVALID_PARAMETER = 6,
  LP_STATUS_CLIP_TOO_SHORT = 7,
  LP_STATUS_OUT_OF_RANGE = 8,
  LP_STATUS_INVALID_BOX = 9,
  LP_STATUS_DEGENERATE_PHASE = 10,
  LP_STATUS_IO = 11,
  LP_STATUS_OTHER = 12,
  LP_STATUS_INTERNAL = 13,
} LpStatus;

/**
 * Mono audio clip.
 */
typedef struct LpAudio LpAudio;

/**
 * Ordered list of phase boxes.
 */
typedef struct LpBoxList LpBoxList;

/**
 * Power spectrogram in dB.
 */
typedef struct LpSpectrogram LpSpectrogram;

typedef struct LpSpectrogramParams {
  size_t segment_len;
  size_t overlap;
  double max_freq_hz;
  /**
   * 0 = Hann, 1 = rectangular.
   */
  uint32_t window;
  double db_floor;
} LpSpectrogramParams;

typedef struct LpPhaseBox {
  /**
   * `LP_INSPIRATION` or `LP_EXPIRATION`.
   */
  uint32_t class_;
  double start_s;
  double end_s;
  double confidence;
} LpPhaseBox;

typedef struct LpBaselineParams {
  double band_low_hz;
  double band_high_hz;
  size_t smooth_frames;
  double onset_db;
  double offset_db;
  double min_phase_s;
  uint32_t start_class;
  double split_db;
  double floor_percentile;
} LpBaselineParams;

typedef struct LpPostprocessParams {
  double confidence_min;
  double duplicate_iou;
  double small_overlap_max_frac;
  bool duplicates_within_class;
} LpPostprocessParams;

typedef struct LpPostprocessTrace {
  size_t n_pruned;
  size_t n_duplicates_removed;
  size_t n_overlaps_resolved;
} LpPostprocessTrace;

typedef struct LpConfusion {
  double tp_s;
  double fp_s;
  double tn_s;
  double fn_s;
} LpConfusion;

typedef struct LpMatchCounts {
  size_t n_a;
  size_t n_b;
  size_t matches;
} LpMatchCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *lp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lp_version(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LpStatus lp_audio_load_wav(const char *path, struct LpAudio **out);

/**
 * Copy `len` samples into a new clip.
 *
 * # Safety
 * `samples` must point to `len` readable floats; `out` must be writable.
 */
enum LpStatus lp_audio_from_samples(const float *samples,
                                    size_t len,
                                    uint32_t sample_rate,
                                    struct LpAudio **out);

/**
 * # Safety
 * `audio` must be a live handle; `out` must be writable.
 */
enum LpStatus lp_audio_resample(const struct LpAudio *audio,
                                uint32_t target_rate,
                                struct LpAudio **out);

/**
 * # Safety
 * `audio` must be a live handle or null.
 */
size_t lp_audio_len(const struct LpAudio *audio);

/**
 * # Safety
 * `audio` must be a live handle or null.
 */
uint32_t lp_audio_sample_rate(const struct LpAudio *audio);

/**
 * Pointer to the clip's samples, valid while the handle lives.
 *
 * # Safety
 * `audio` must be a live handle or null.
 */
const float *lp_audio_samples(const struct LpAudio *audio);

/**
 * # Safety
 * `audio` must come from this library and not be freed twice; null is ignored.
 */
void lp_audio_free(struct LpAudio *audio);

struct LpSpectrogramParams lp_spectrogram_params_default(void);

/**
 * `params` may be null for defaults.
 *
 * # Safety
 * `audio` must be a live handle, `params` null or readable, `out` writable.
 */
enum LpStatus lp_spectrogram_compute(const struct LpAudio *audio,
                                     const struct LpSpectrogramParams *params,
                                     struct LpSpectrogram **out);

/**
 * # Safety
 * `spec` must be a live handle or null.
 */
size_t lp_spectrogram_n_bins(const struct LpSpectrogram *spec);

/**
 * # Safety
 * `spec` must be a live handle or null.
 */
size_t lp_spectrogram_n_frames(const struct LpSpectrogram *spec);

/**
 * # Safety
 * `spec` must be a live handle or null.
 */
double lp_spectrogram_hop_s(const struct LpSpectrogram *spec);

/**
 * # Safety
 * `spec` must be a live handle or null.
 */
double lp_spectrogram_bin_hz(const struct LpSpectrogram *spec);

/**
 * dB values, bin-major (`values[bin * n_frames + frame]`), valid while the
 * handle lives.
 *
 * # Safety
 * `spec` must be a live handle or null.
 */
const double *lp_spectrogram_values(const struct LpSpectrogram *spec);

/**
 * # Safety
 * `spec` must be a live handle; `out` writable.
 */
enum LpStatus lp_spectrogram_time_to_frame(const struct LpSpectrogram *spec, double t, size_t *out);

/**
 * # Safety
 * `spec` must come from this library and not be freed twice; null is ignored.
 */
void lp_spectrogram_free(struct LpSpectrogram *spec);

/**
 * Copy `n` boxes into a new list; each box is validated.
 *
 * # Safety
 * `boxes` must point to `n` readable boxes (may be null when `n == 0`);
 * `out` must be writable.
 */
enum LpStatus lp_boxes_new(const struct LpPhaseBox *boxes, size_t n, struct LpBoxList **out);

/**
 * # Safety
 * `list` must be a live handle or null.
 */
size_t lp_boxes_len(const struct LpBoxList *list);

/**
 * # Safety
 * `list` must be a live handle; `out` writable.
 */
enum LpStatus lp_boxes_get(const struct LpBoxList *list, size_t index, struct LpPhaseBox *out);

/**
 * # Safety
 * `list` must come from this library and not be freed twice; null is ignored.
 */
void lp_boxes_free(struct LpBoxList *list);

struct LpBaselineParams lp_baseline_params_default(void);

/**
 * Run the baseline detector. `params` may be null for defaults.
 *
 * # Safety
 * `spec` must be a live handle, `params` null or readable, `out` writable.
 */
enum LpStatus lp_detect_baseline(const struct LpSpectrogram *spec,
                                 const struct LpBaselineParams *params,
                                 struct LpBoxList **out);

struct LpPostprocessParams lp_postprocess_params_default(void);

/**
 * Prune, suppress duplicates and resolve overlaps into a new list.
 * `params` and `trace` may be null.
 *
 * # Safety
 * `list` must be a live handle, `params` null or readable, `out` writable,
 * `trace` null or writable.
 */
enum LpStatus lp_postprocess(const struct LpBoxList *list,
                             const struct LpPostprocessParams *params,
                             struct LpBoxList **out,
                             struct LpPostprocessTrace *trace);

/**
 * Continuous-time confusion of one class over `[0, duration_s)`, roles as
 * defined (FP = A - B, FN = not A - not B).
 *
 * # Safety
 * `a` and `b` must be live handles; `out` writable.
 */
enum LpStatus lp_confusion(const struct LpBoxList *a,
                           const struct LpBoxList *b,
                           uint32_t class_,
                           double duration_s,
                           struct LpConfusion *out);

/**
 * Box-level matching (same class, Jaccard > 0.5, one-to-one). Either
 * output may be null.
 *
 * # Safety
 * `a` and `b` must be live handles; outputs null or writable.
 */
enum LpStatus lp_match_boxes(const struct LpBoxList *a,
                             const struct LpBoxList *b,
                             struct LpMatchCounts *inspiration,
                             struct LpMatchCounts *expiration);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LUNGPHASE_H */
