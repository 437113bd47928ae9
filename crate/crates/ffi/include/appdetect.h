#ifndef APPDETECT_H
#define APPDETECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible call.
 */
typedef enum AdStatus {
  AD_OK = 0,
  AD_NULL_POINTER = 1,
  AD_VALIDATION = 2,
  AD_DIMENSION = 3,
  AD_PARSE = 4,
  AD_IO = 5,
  AD_TIMEOUT = 6,
  AD_RUNTIME = 7,
  AD_PANIC = 8,
} AdStatus;

/**
 * A fitted classifier.
 */
typedef struct AdModel AdModel;

/**
 * Fits a classifier with default hyperparameters.
 *
 * `train_values` holds `n_train` series of `series_len` values each, row
 * after row; `train_labels` holds one 0/1 label per series. The validation
 * set is only used by the neural classifiers and may be empty otherwise.
 * `kind` is a classifier name such as `"rocket"` or `"knn-euclid"`.
 *
 * # Safety
 * Pointers must be valid for the given lengths; `out` must be writable.
 */
enum AdStatus ad_fit(const char *kind,
                     const double *train_values,
                     const uint8_t *train_labels,
                     size_t n_train,
                     size_t series_len,
                     const double *val_values,
                     const uint8_t *val_labels,
                     size_t n_val,
                     uint64_t seed,
                     struct AdModel **out);

/**
 * Loads a model written by [`ad_model_save`] or the Rust API.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum AdStatus ad_model_load(const char *path, struct AdModel **out);

/**
 * Decodes a model from an in-memory record.
 *
 * # Safety
 * `data` must be valid for `len` bytes; `out` must be writable.
 */
enum AdStatus ad_model_from_bytes(const uint8_t *data, size_t len, struct AdModel **out);

/**
 * Writes the model to `path`.
 *
 * # Safety
 * `model` must come from this library; `path` must be NUL-terminated.
 */
enum AdStatus ad_model_save(const struct AdModel *model, const char *path);

/**
 * Length every scored series must have.
 *
 * # Safety
 * `model` must come from this library; `out` must be writable.
 */
enum AdStatus ad_model_series_len(const struct AdModel *model, size_t *out);

/**
 * Classifier name of the model as a static NUL-terminated string.
 *
 * # Safety
 * `model` must come from this library; `out` must be writable.
 */
enum AdStatus ad_model_kind(const struct AdModel *model, const char **out);

/**
 * Score in [0, 1] of one series; 0.5 and above means the appliance is
 * present.
 *
 * # Safety
 * `values` must be valid for `len` doubles; `out` must be writable.
 */
enum AdStatus ad_model_score(const struct AdModel *model,
                             const double *values,
                             size_t len,
                             double *out);

/**
 * Predicted 0/1 label of one series.
 *
 * # Safety
 * `values` must be valid for `len` doubles; `out` must be writable.
 */
enum AdStatus ad_model_predict(const struct AdModel *model,
                               const double *values,
                               size_t len,
                               uint8_t *out);

/**
 * Scores `n_series` consecutive series of the model's length into
 * `out_scores`.
 *
 * # Safety
 * `values` must hold `n_series * series_len` doubles and `out_scores`
 * room for `n_series`.
 */
enum AdStatus ad_model_score_batch(const struct AdModel *model,
                                   const double *values,
                                   size_t n_series,
                                   double *out_scores);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void ad_model_free(struct AdModel *model);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into the library from the same thread.
 */
const char *ad_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ad_version(void);

#endif  /* APPDETECT_H */
