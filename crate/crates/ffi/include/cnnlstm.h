#ifndef CNNLSTM_H
#define CNNLSTM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Split selector for [`cnnlstm_evaluate`].
 */
#define CNNLSTM_SPLIT_TRAIN 0

#define CNNLSTM_SPLIT_VALIDATION 1

#define CNNLSTM_SPLIT_TEST 2

/**
 * Mirrors the CLI exit statuses, plus codes that only arise across the ABI.
 */
typedef enum CnnlstmStatus {
  CNNLSTM_STATUS_OK = 0,
  CNNLSTM_STATUS_INPUT_ERROR = 2,
  CNNLSTM_STATUS_DIVERGED = 3,
  CNNLSTM_STATUS_INCOMPATIBLE = 4,
  CNNLSTM_STATUS_VERIFICATION_FAILED = 5,
  CNNLSTM_STATUS_NULL_POINTER = 10,
  CNNLSTM_STATUS_INVALID_ARGUMENT = 11,
  CNNLSTM_STATUS_PANIC = 12,
} CnnlstmStatus;

/**
 * A loaded checkpoint: model parameters and frozen preprocessing.
 */
typedef struct CnnlstmCheckpoint CnnlstmCheckpoint;

/**
 * A loaded prepared dataset with its windows built.
 */
typedef struct CnnlstmDataset CnnlstmDataset;

/**
 * Price-space metrics of one split.
 */
typedef struct CnnlstmMetrics {
  double explained_variance;
  double r2;
  double max_error;
  size_t samples;
} CnnlstmMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a checkpoint file. On success `*out` receives a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CnnlstmStatus cnnlstm_checkpoint_load(const char *path, struct CnnlstmCheckpoint **out);

/**
 * Releases a checkpoint handle. Null is ignored.
 *
 * # Safety
 * `ptr` must come from [`cnnlstm_checkpoint_load`] and not be used afterwards.
 */
void cnnlstm_checkpoint_free(struct CnnlstmCheckpoint *ptr);

/**
 * Window length the model expects, or 0 for a null handle.
 *
 * # Safety
 * `ptr` must be null or a live checkpoint handle.
 */
size_t cnnlstm_checkpoint_lookback(const struct CnnlstmCheckpoint *ptr);

/**
 * Input features per time step, or 0 for a null handle.
 *
 * # Safety
 * `ptr` must be null or a live checkpoint handle.
 */
size_t cnnlstm_checkpoint_features(const struct CnnlstmCheckpoint *ptr);

/**
 * Predicts the scaled target for one window of model inputs laid out
 * row-major as `[lookback][features]` (already preprocessed).
 *
 * # Safety
 * `window` must point to `len` doubles and `out` to one writable double.
 */
enum CnnlstmStatus cnnlstm_predict_scaled(const struct CnnlstmCheckpoint *ptr,
                                          const double *window,
                                          size_t len,
                                          double *out);

/**
 * Like [`cnnlstm_predict_scaled`] but maps the output back to a price.
 *
 * # Safety
 * `window` must point to `len` doubles and `out` to one writable double.
 */
enum CnnlstmStatus cnnlstm_predict_price(const struct CnnlstmCheckpoint *ptr,
                                         const double *window,
                                         size_t len,
                                         double *out);

/**
 * Loads a prepared dataset file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CnnlstmStatus cnnlstm_dataset_load(const char *path, struct CnnlstmDataset **out);

/**
 * Releases a dataset handle. Null is ignored.
 *
 * # Safety
 * `ptr` must come from [`cnnlstm_dataset_load`] and not be used afterwards.
 */
void cnnlstm_dataset_free(struct CnnlstmDataset *ptr);

/**
 * Number of windows in the dataset, or 0 for a null handle.
 *
 * # Safety
 * `ptr` must be null or a live dataset handle.
 */
size_t cnnlstm_dataset_samples(const struct CnnlstmDataset *ptr);

/**
 * Copies sample `index`'s model inputs (`lookback * features` doubles) into `out`.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum CnnlstmStatus cnnlstm_dataset_window(const struct CnnlstmDataset *ptr,
                                          size_t index,
                                          double *out,
                                          size_t len);

/**
 * Metrics for one split (`CNNLSTM_SPLIT_*`) in price space.
 *
 * # Safety
 * Handles must be live and `out` must be writable.
 */
enum CnnlstmStatus cnnlstm_evaluate(const struct CnnlstmCheckpoint *checkpoint,
                                    const struct CnnlstmDataset *dataset,
                                    uint32_t split,
                                    struct CnnlstmMetrics *out);

/**
 * Runs the per-layer and full-stack gradient checks for `seed`. Writes the
 * worst relative error to `out_max_error` (may be null) and returns
 * `VerificationFailed` when it is not below 1e-5.
 *
 * # Safety
 * `out_max_error` must be null or writable.
 */
enum CnnlstmStatus cnnlstm_gradcheck(uint64_t seed, double *out_max_error);

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *cnnlstm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cnnlstm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CNNLSTM_H */
