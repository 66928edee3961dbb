#ifndef RFTRIGGER_H
#define RFTRIGGER_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RftDetector {
  RFT_DETECTOR_VW = 0,
  RFT_DETECTOR_FIXED = 1,
  RFT_DETECTOR_PBC = 2,
} RftDetector;

typedef enum RftMechanism {
  RFT_MECHANISM_HIGH_THRESHOLD = 0,
  RFT_MECHANISM_DWELL = 1,
} RftMechanism;

/**
 * Result code of every call.
 */
typedef enum RftStatus {
  RFT_STATUS_OK = 0,
  RFT_STATUS_NULL_POINTER = 1,
  RFT_STATUS_INVALID_INPUT = 2,
  RFT_STATUS_SHAPE_MISMATCH = 3,
  RFT_STATUS_FORMAT = 4,
  RFT_STATUS_IO = 5,
  RFT_STATUS_DOMAIN = 6,
  RFT_STATUS_NUMERICAL = 7,
  RFT_STATUS_CONFIG = 8,
  RFT_STATUS_BUFFER_TOO_SMALL = 9,
  RFT_STATUS_PANIC = 10,
} RftStatus;

typedef enum RftTriggerMode {
  RFT_TRIGGER_MODE_SINGLE = 0,
  RFT_TRIGGER_MODE_DOUBLE = 1,
} RftTriggerMode;

/**
 * Opaque IQ data cube.
 */
typedef struct RftCube RftCube;

/**
 * Opaque per-step class posterior stream.
 */
typedef struct RftScoreStream RftScoreStream;

/**
 * STA/LTA thresholds in steps.
 */
typedef struct RftStaLta {
  size_t t1_steps;
  size_t t2_steps;
  double sigma1;
  double sigma2;
  double sigma3;
  size_t min_steps;
} RftStaLta;

/**
 * Inclusive step interval.
 */
typedef struct RftInterval {
  size_t start_step;
  size_t end_step;
} RftInterval;

/**
 * Trigger parameters; `trigger_class` is a NUL-terminated label.
 */
typedef struct RftTriggerConfig {
  const char *trigger_class;
  double gamma;
  double gamma_low;
  double dwell_fraction;
  bool dwell_requires_classification;
} RftTriggerConfig;

typedef struct RftTriggerEvent {
  struct RftInterval interval;
  size_t fire_step;
  double accumulated_score;
  enum RftMechanism mechanism;
} RftTriggerEvent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `capacity`. Returns the full message length without the
 * NUL; 0 when the last call succeeded.
 */
size_t rft_last_error_message(char *buf, size_t capacity);

/**
 * Loads an RFC1 cube file.
 */
enum RftStatus rft_cube_load(const char *path, struct RftCube **out);

enum RftStatus rft_cube_save(const struct RftCube *cube, const char *path);

/**
 * Releases a cube; null is ignored.
 */
void rft_cube_free(struct RftCube *cube);

/**
 * Fast-time samples, slow-time pulses, channels and whether the channels
 * are virtual (demultiplexed).
 */
enum RftStatus rft_cube_shape(const struct RftCube *cube,
                              size_t *n_fast,
                              size_t *n_slow,
                              size_t *n_chan,
                              bool *is_virtual);

/**
 * BPM demultiplexing of a physical cube into a new virtual cube.
 */
enum RftStatus rft_cube_demux(const struct RftCube *cube, struct RftCube **out);

/**
 * BPM multiplexing of a virtual cube into a new physical cube.
 */
enum RftStatus rft_cube_mux(const struct RftCube *cube, struct RftCube **out);

/**
 * Linear range-Doppler magnitude of one CPI and channel, row-major
 * `[range_bin][doppler_bin]` with zero Doppler at column `n_doppler / 2`.
 */
enum RftStatus rft_cube_range_doppler(const struct RftCube *cube,
                                      size_t cpi_index,
                                      size_t channel,
                                      double *out,
                                      size_t capacity,
                                      size_t *out_len,
                                      size_t *n_range,
                                      size_t *n_doppler);

/**
 * Anchored DTW between two value sequences; infinity when either is empty.
 */
enum RftStatus rft_dtw(const double *a, size_t n_a, const double *b, size_t n_b, double *out);

/**
 * Discrete Fréchet distance between curves `(t_a, f_a)` and `(t_b, f_b)`;
 * `standardized` rescales both axes jointly before measuring.
 */
enum RftStatus rft_dfd(const double *t_a,
                       const double *f_a,
                       size_t n_a,
                       const double *t_b,
                       const double *f_b,
                       size_t n_b,
                       bool standardized,
                       double *out);

/**
 * Motion intervals of a distance vector. `fixed_window_steps` is used by
 * the fixed-window detector and `pbc_threshold` by the threshold-crossing
 * one; the vector is max-normalized first.
 */
enum RftStatus rft_detect_motion(const double *values,
                                 size_t n,
                                 enum RftDetector detector,
                                 const struct RftStaLta *sta_lta,
                                 size_t fixed_window_steps,
                                 double pbc_threshold,
                                 struct RftInterval *out,
                                 size_t capacity,
                                 size_t *out_len);

/**
 * Builds a score stream from row-major `n_steps x n_labels` posteriors.
 * `labels[0]` must be `"blank"`; each row must sum to 1.
 */
enum RftStatus rft_scores_new(const double *probs,
                              size_t n_steps,
                              size_t n_labels,
                              const char *const *labels,
                              double step_s,
                              struct RftScoreStream **out);

void rft_scores_free(struct RftScoreStream *stream);

/**
 * Greedy best-path decoding as label indices (blank is index 0 and never
 * appears in the output).
 */
enum RftStatus rft_best_path_decode(const struct RftScoreStream *stream,
                                    size_t *out,
                                    size_t capacity,
                                    size_t *out_len);

/**
 * Cumulative-score trigger detection over `intervals`.
 */
enum RftStatus rft_trigger(const struct RftScoreStream *stream,
                           const struct RftInterval *intervals,
                           size_t n_intervals,
                           const struct RftTriggerConfig *config,
                           enum RftTriggerMode mode,
                           struct RftTriggerEvent *out,
                           size_t capacity,
                           size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RFTRIGGER_H */
