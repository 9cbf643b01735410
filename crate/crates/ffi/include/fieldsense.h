#ifndef FIELDSENSE_H
#define FIELDSENSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FsStatus {
  FS_STATUS_OK = 0,
  FS_STATUS_NULL_POINTER = 1,
  FS_STATUS_INVALID_PARAMETER = 2,
  FS_STATUS_INSUFFICIENT_DATA = 3,
  FS_STATUS_DEGENERATE = 4,
  FS_STATUS_NUMERIC = 5,
  FS_STATUS_IO = 6,
  FS_STATUS_PARSE = 7,
  FS_STATUS_PANIC = 8,
} FsStatus;

// Opaque self-learning ground model.
typedef struct FsGroundModel FsGroundModel;

// Opaque traversability map.
typedef struct FsMap FsMap;

// Confusion counts with ground as the positive class.
typedef struct FsConfusion {
  uint64_t tp;
  uint64_t fp;
  uint64_t tn;
  uint64_t fn_;
  // Cells where either map was unknown or occluded.
  uint64_t unknown;
} FsConfusion;

// Evaluation metrics. Undefined ratios (zero denominator) are NaN.
typedef struct FsMetrics {
  double precision;
  double rejection_precision;
  double recall;
  double specificity;
  double accuracy;
  double f1;
} FsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last error raised on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *fs_last_error(void);

// Library version as a static NUL-terminated string.
const char *fs_version(void);

// Bootstraps a ground model from `n` feature rows of length `dim`
// stored row-major in `features`.
//
// # Safety
// `features` must point to `n * dim` doubles and `out_model` must be a
// valid pointer to write the handle into.
enum FsStatus fs_ground_model_new(const double *features,
                                  size_t n,
                                  size_t dim,
                                  size_t capacity,
                                  double confidence,
                                  double epsilon,
                                  struct FsGroundModel **out_model);

// # Safety
// `model` must be NULL or a handle from [`fs_ground_model_new`] that has
// not been freed.
void fs_ground_model_free(struct FsGroundModel *model);

// Feature dimension of the model, or 0 for a NULL handle.
//
// # Safety
// `model` must be NULL or a live handle.
size_t fs_ground_model_dim(const struct FsGroundModel *model);

// Scores one feature vector of length `dim`. Writes the squared
// Mahalanobis distance and whether it falls within the ground threshold.
//
// # Safety
// `model` must be a live handle, `x` must point to `dim` doubles and the
// output pointers must be valid.
enum FsStatus fs_ground_model_classify(const struct FsGroundModel *model,
                                       const double *x,
                                       size_t dim,
                                       double *out_score,
                                       bool *out_is_ground);

// Feeds `n` ground-labelled feature rows into the rolling buffer.
//
// # Safety
// `model` must be a live handle and `features` must point to
// `n * dim` doubles where `dim` is the model dimension.
enum FsStatus fs_ground_model_update(struct FsGroundModel *model, const double *features, size_t n);

// Confidence-weighted fusion of a LIDAR and a stereo score for one patch.
// Each sensor's weight is its precision when it labels the patch ground
// and its rejection precision otherwise.
//
// # Safety
// `out_score` must be a valid pointer.
enum FsStatus fs_fused_score(double score_lidar,
                             bool lidar_is_ground,
                             double score_stereo,
                             bool stereo_is_ground,
                             double lidar_precision,
                             double lidar_rejection_precision,
                             double stereo_precision,
                             double stereo_rejection_precision,
                             double *out_score);

// Cell-averaging CFAR over a polar power image stored range-major
// (`intensities[r * azimuth_bins + a]`). Writes 1 for each detection and
// 0 elsewhere into `out_mask`, which must hold the same number of cells.
//
// # Safety
// `intensities` and `out_mask` must each point to
// `range_bins * azimuth_bins` elements.
enum FsStatus fs_cfar(const double *intensities,
                      size_t range_bins,
                      size_t azimuth_bins,
                      size_t n_train,
                      size_t n_guard,
                      double p_fa,
                      uint8_t *out_mask);

// Computes the metric report for a confusion matrix.
//
// # Safety
// `out_metrics` must be a valid pointer.
enum FsStatus fs_metrics(struct FsConfusion cm, struct FsMetrics *out_metrics);

// Loads a map from its CSV export.
//
// # Safety
// `path` must be a NUL-terminated string and `out_map` a valid pointer.
enum FsStatus fs_map_read_csv(const char *path, struct FsMap **out_map);

// # Safety
// `map` must be NULL or a live handle from [`fs_map_read_csv`].
void fs_map_free(struct FsMap *map);

// Grid dimensions of a map. Either output may be NULL.
//
// # Safety
// `map` must be a live handle; non-NULL outputs must be valid.
enum FsStatus fs_map_shape(const struct FsMap *map, size_t *out_rows, size_t *out_cols);

// Cell-by-cell comparison of a predicted map against a truth map with
// the same geometry.
//
// # Safety
// Both maps must be live handles and `out_confusion` a valid pointer.
enum FsStatus fs_map_eval(const struct FsMap *pred,
                          const struct FsMap *truth,
                          struct FsConfusion *out_confusion);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIELDSENSE_H */
