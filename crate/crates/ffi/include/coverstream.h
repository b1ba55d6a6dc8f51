#ifndef COVERSTREAM_H
#define COVERSTREAM_H

/* Generated by cbindgen from coverstream-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_ARGUMENT = 1,
  CS_STATUS_INVALID_ARGUMENT = 2,
  CS_STATUS_DIMENSION_MISMATCH = 3,
  CS_STATUS_INVALID_UTF8 = 4,
  CS_STATUS_IO = 5,
  CS_STATUS_INTERNAL = 6,
} CsStatus;

/**
 * Active-learning variant selector.
 */
typedef enum {
  CS_VARIANT_FULL = 0,
  CS_VARIANT_RND = 1,
  CS_VARIANT_VAR_UN = 2,
  CS_VARIANT_VAR_UN_FIX = 3,
} CsVariant;

/**
 * Opaque model handle.
 */
typedef struct CsModel CsModel;

/**
 * Opaque stream-session handle: threshold state, prequential statistics,
 * and the session RNG.
 */
typedef struct CsStream CsStream;

/**
 * Prediction for one bag. `label` is null while the model is empty.
 */
typedef struct {
  char *label;
  double confidence;
} CsPrediction;

/**
 * Outcome of one stream step. `predicted` is null for unknown predictions.
 */
typedef struct {
  char *predicted;
  bool queried;
  bool correct;
  double confidence;
  double threshold;
  double query_rate;
  double online_accuracy;
  uintptr_t balls;
} CsStepInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the library version as a static string; do not free.
 */
const char *cs_version(void);

/**
 * Returns and clears the last error message on this thread, or null.
 * Free the result with `cs_string_free`.
 */
char *cs_last_error(void);

/**
 * Frees a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must have been returned by this library and not freed before.
 */
void cs_string_free(char *s);

/**
 * Creates a model. `max_balls == 0` means unlimited; `seed` drives the
 * model's eviction RNG.
 */
CsModel *cs_model_new(uintptr_t max_balls, uint64_t seed);

/**
 * Destroys a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must come from `cs_model_new`/`cs_model_load` and not be used
 * afterwards.
 */
void cs_model_free(CsModel *model);

/**
 * Number of balls currently in the model; 0 for null.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
uintptr_t cs_model_num_balls(const CsModel *model);

/**
 * Number of classes seen so far; 0 for null.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
uintptr_t cs_model_num_classes(const CsModel *model);

/**
 * Learns one labeled bag.
 *
 * # Safety
 * `model` must be a live handle, `data` must point to
 * `descriptors * dim` doubles, and `label` must be NUL-terminated.
 */
CsStatus cs_model_learn(CsModel *model,
                        const double *data,
                        uintptr_t descriptors,
                        uintptr_t dim,
                        const char *label);

/**
 * Predicts one bag; fills `out` with the label (caller frees) and the
 * prediction confidence.
 *
 * # Safety
 * `model` must be a live handle, `data` must point to
 * `descriptors * dim` doubles, and `out` must be writable.
 */
CsStatus cs_model_predict(const CsModel *model,
                          const double *data,
                          uintptr_t descriptors,
                          uintptr_t dim,
                          CsPrediction *out);

/**
 * Saves the model snapshot to `path`.
 *
 * # Safety
 * `model` must be a live handle and `path` NUL-terminated.
 */
CsStatus cs_model_save(const CsModel *model, const char *path);

/**
 * Loads a model snapshot; returns null on failure (see `cs_last_error`).
 *
 * # Safety
 * `path` must be NUL-terminated.
 */
CsModel *cs_model_load(const char *path);

/**
 * Creates a stream session; returns null on invalid budget or tau.
 */
CsStream *cs_stream_new(CsVariant variant, double budget, double tau, uint64_t seed);

/**
 * Destroys a stream handle. Null is a no-op.
 *
 * # Safety
 * `stream` must come from `cs_stream_new` and not be used afterwards.
 */
void cs_stream_free(CsStream *stream);

/**
 * Advances one stream step: predicts the bag, updates the online accuracy,
 * and — when the strategy decides to spend budget — learns from
 * `true_label`. The caller acts as the annotation oracle.
 *
 * # Safety
 * `stream` and `model` must be live handles, `data` must point to
 * `descriptors * dim` doubles, `true_label` must be NUL-terminated, and
 * `out` must be writable.
 */
CsStatus cs_stream_step(CsStream *stream,
                        CsModel *model,
                        const double *data,
                        uintptr_t descriptors,
                        uintptr_t dim,
                        const char *true_label,
                        CsStepInfo *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* COVERSTREAM_H */
