/* C interface to the spectre frequency-domain token mixer. */

#ifndef SPECTRE_H
#define SPECTRE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum SpectreStatus {
  SPECTRE_STATUS_OK = 0,
  /**
   * Null pointer or otherwise unusable argument.
   */
  SPECTRE_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Rejected configuration value.
   */
  SPECTRE_STATUS_CONFIG = 2,
  /**
   * Dimension mismatch.
   */
  SPECTRE_STATUS_SHAPE = 3,
  /**
   * Sequence exceeds the configured window.
   */
  SPECTRE_STATUS_CAPACITY = 4,
  /**
   * Call not valid for the handle's current state.
   */
  SPECTRE_STATUS_STATE = 5,
  /**
   * Filesystem error.
   */
  SPECTRE_STATUS_IO = 6,
  /**
   * Malformed container file.
   */
  SPECTRE_STATUS_FORMAT = 7,
  /**
   * Container checksum mismatch.
   */
  SPECTRE_STATUS_CHECKSUM = 8,
  /**
   * Panic or other internal failure.
   */
  SPECTRE_STATUS_INTERNAL = 9,
} SpectreStatus;

/**
 * Opaque model handle.
 */
typedef struct SpectreModel SpectreModel;

/**
 * Opaque stream handle (prefilled decode session).
 */
typedef struct SpectreStream SpectreStream;

/**
 * Model construction parameters; see `spectre_model_params_default`.
 */
typedef struct SpectreModelParams {
  uint32_t n_layers;
  uint32_t heads;
  uint32_t head_dim;
  /**
   * Feed-forward width; 0 means `4 * heads * head_dim`.
   */
  uint32_t d_ffn;
  /**
   * Sliding-window / FFT length, a power of two.
   */
  uint32_t n_max;
  /**
   * 0 disables the vocabulary (raw-embedding generation).
   */
  uint32_t vocab_size;
  /**
   * Persistent memory rows per head; 0 disables the bank.
   */
  uint32_t memory_tokens;
  bool toeplitz_enabled;
  uint32_t toeplitz_radius;
  bool wrm_enabled;
  uint32_t wrm_levels;
  uint64_t seed;
} SpectreModelParams;

/**
 * Timing and footprint summary of one stream.
 */
typedef struct SpectreReport {
  /**
   * Prefill wall time in milliseconds.
   */
  double ttft_ms;
  /**
   * Mean decode-step wall time in milliseconds.
   */
  double tpot_ms;
  /**
   * Prompt length the stream started from.
   */
  uint64_t prompt_len;
  /**
   * Decode steps taken so far.
   */
  uint64_t steps;
  /**
   * Bytes held by the decode state across layers and heads.
   */
  uint64_t state_bytes;
} SpectreReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the library behind this interface.
 */
const char *spectre_version(void);

/**
 * Message for the most recent error on this thread. Valid until the next
 * failing call on the same thread.
 */
const char *spectre_last_error(void);

/**
 * Fills `params` with the default configuration.
 * # Safety
 * `params` must be null or valid for writing one `SpectreModelParams`.
 */
void spectre_model_params_default(struct SpectreModelParams *params);

/**
 * Creates a model with seeded random weights.
 * # Safety
 * `params` must point to a valid struct and `out` must be valid for
 * writing one pointer.
 */
enum SpectreStatus spectre_model_create(const struct SpectreModelParams *params,
                                        struct SpectreModel **out);

/**
 * Loads a weight container written by `spectre_model_save` (f32 contents).
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writing one
 * pointer.
 */
enum SpectreStatus spectre_model_load(const char *path, struct SpectreModel **out);

/**
 * Writes the model to a weight container.
 * # Safety
 * `model` must be a live handle from this library and `path` a
 * NUL-terminated string.
 */
enum SpectreStatus spectre_model_save(const struct SpectreModel *model, const char *path);

/**
 * # Safety
 * `model` must be null or a handle from this library, not yet freed.
 */
void spectre_model_free(struct SpectreModel *model);

/**
 * Embedding width of the model's token rows (0 for a null handle).
 * # Safety
 * `model` must be null or a live handle from this library.
 */
uint32_t spectre_model_dim(const struct SpectreModel *model);

/**
 * Exact parameter tallies: everything, and the mixer-specific additions.
 * # Safety
 * `model` must be a live handle; `total` and `mixer_added` must be valid
 * for writing one `u64` each.
 */
enum SpectreStatus spectre_model_param_counts(const struct SpectreModel *model,
                                              uint64_t *total,
                                              uint64_t *mixer_added);

/**
 * Batch forward over `n_tokens` rows of `d_model` floats (row-major).
 * `out` must hold `n_tokens * d_model` floats.
 * # Safety
 * `x` must hold `n_tokens * d_model` floats and `out` must be valid for
 * writing the same amount.
 */
enum SpectreStatus spectre_model_forward(const struct SpectreModel *model,
                                         const float *x,
                                         size_t n_tokens,
                                         float *out);

/**
 * Prefills a decode stream over `prompt_len` rows of `d_model` floats.
 * # Safety
 * `prompt` must hold `prompt_len * d_model` floats; `out` must be valid
 * for writing one pointer.
 */
enum SpectreStatus spectre_stream_open(const struct SpectreModel *model,
                                       const float *prompt,
                                       size_t prompt_len,
                                       struct SpectreStream **out);

/**
 * Advances the stream one token. `next_in` supplies the input row; pass
 * NULL to feed the previous output back (generation). `out_row` receives
 * `d_model` floats.
 * # Safety
 * `stream` must be a live handle stepped from one thread at a time;
 * `next_in` must be null or hold `d_model` floats; `out_row` must be
 * valid for writing `d_model` floats.
 */
enum SpectreStatus spectre_stream_step(struct SpectreStream *stream,
                                       const float *next_in,
                                       float *out_row);

/**
 * Snapshot of the stream's timing counters.
 * # Safety
 * `stream` must be a live handle and `report` valid for writing one
 * `SpectreReport`.
 */
enum SpectreStatus spectre_stream_report(const struct SpectreStream *stream,
                                         struct SpectreReport *report);

/**
 * # Safety
 * `stream` must be null or a handle from this library, not yet freed.
 */
void spectre_stream_free(struct SpectreStream *stream);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECTRE_H */
