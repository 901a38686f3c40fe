#ifndef DIPE_H
#define DIPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DipeStatus {
  DIPE_STATUS_OK = 0,
  DIPE_STATUS_NULL_POINTER = 1,
  DIPE_STATUS_INVALID_ARGUMENT = 2,
  DIPE_STATUS_IO = 3,
  DIPE_STATUS_FORMAT = 4,
  DIPE_STATUS_MANIFEST = 5,
  DIPE_STATUS_OUT_OF_RANGE = 6,
  DIPE_STATUS_BUFFER_TOO_SMALL = 7,
  DIPE_STATUS_PANIC = 8,
} DipeStatus;

typedef enum DipeStrategy {
  DIPE_STRATEGY_DIPE = 0,
  DIPE_STRATEGY_DIPE_ABLATED = 1,
  DIPE_STRATEGY_TOP_K = 2,
  DIPE_STRATEGY_ALL = 3,
  // Needs a dataset; only accepted by `dipe_dataset_select`.
  DIPE_STRATEGY_EXHAUSTIVE = 4,
} DipeStrategy;

// A loaded manifest: ground truth plus every model's predictions.
typedef struct DipeDataset DipeDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *dipe_version(void);

// Message for the previous call on this thread if it failed, or NULL. The
// pointer stays valid until the next call into the library on the same
// thread.
const char *dipe_last_error(void);

// Loads and validates a manifest and every file it references.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum DipeStatus dipe_dataset_open(const char *path, struct DipeDataset **out);

// Releases a dataset. NULL is ignored.
//
// # Safety
// `handle` must come from `dipe_dataset_open` and not be used afterwards.
void dipe_dataset_free(struct DipeDataset *handle);

// Number of models, or 0 for NULL.
//
// # Safety
// `handle` must be NULL or a live dataset.
size_t dipe_dataset_model_count(const struct DipeDataset *handle);

// Number of slices, or 0 for NULL.
//
// # Safety
// `handle` must be NULL or a live dataset.
size_t dipe_dataset_slice_count(const struct DipeDataset *handle);

// Model id at `index`, owned by the dataset; NULL when out of range.
//
// # Safety
// `handle` must be NULL or a live dataset.
const char *dipe_dataset_model_id(const struct DipeDataset *handle, size_t index);

// Per-model mean Dice and IoU against ground truth. `iou_out` may be NULL.
//
// # Safety
// Output arrays must hold `len` doubles.
enum DipeStatus dipe_dataset_scores(const struct DipeDataset *handle,
                                    double threshold_value,
                                    double *dice_out,
                                    double *iou_out,
                                    size_t len);

// Row-major n x n agreement matrix.
//
// # Safety
// `out` must hold `len` doubles.
enum DipeStatus dipe_dataset_correlation(const struct DipeDataset *handle,
                                         double threshold_value,
                                         double *out,
                                         size_t len);

// Selects `k` of `n` models given a row-major agreement matrix and the
// per-model scores.
// Writes member indices in order of addition (`k` values, or `n` for
// `All`). `Exhaustive` is rejected here.
//
// # Safety
// `correlation` must hold n*n doubles, `scores` n doubles and
// `members_out` `members_len` values.
enum DipeStatus dipe_select(enum DipeStrategy strategy,
                            const double *correlation,
                            const double *scores,
                            size_t n,
                            size_t k,
                            size_t *members_out,
                            size_t members_len);

// Any strategy, including `Exhaustive`, computed from the dataset.
//
// # Safety
// `members_out` must hold `members_len` values.
enum DipeStatus dipe_dataset_select(const struct DipeDataset *handle,
                                    enum DipeStrategy strategy,
                                    double threshold_value,
                                    size_t k,
                                    size_t *members_out,
                                    size_t members_len);

// Mean Dice and IoU of the fused ensemble. Either output may be NULL.
//
// # Safety
// `members` must hold `count` indices.
enum DipeStatus dipe_dataset_evaluate(const struct DipeDataset *handle,
                                      const size_t *members,
                                      size_t count,
                                      double threshold_value,
                                      double *dice_out,
                                      double *iou_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIPE_H */
