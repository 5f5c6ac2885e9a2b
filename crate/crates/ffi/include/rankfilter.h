#ifndef RANKFILTER_H
#define RANKFILTER_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum RfStatus {
  RF_STATUS_OK = 0,
  RF_STATUS_NULL_POINTER = 1,
  RF_STATUS_INVALID_ARGUMENT = 2,
  RF_STATUS_IO = 3,
  RF_STATUS_PARSE = 4,
  RF_STATUS_DIMENSION_MISMATCH = 5,
  RF_STATUS_INVARIANT = 6,
  RF_STATUS_PANIC = 7,
} RfStatus;

/**
 * A loaded filter model.
 */
typedef struct RfFilterModel RfFilterModel;

/**
 * Center-format box in normalized coordinates.
 */
typedef struct RfBox {
  double cx;
  double cy;
  double w;
  double h;
} RfBox;

typedef struct RfDetection {
  struct RfBox bbox;
  double score;
  uint32_t category;
} RfDetection;

typedef struct RfGroundTruth {
  struct RfBox bbox;
  uint32_t category;
} RfGroundTruth;

/**
 * Greedy-matching label of one detection. `assigned_gt` is -1 when the scene
 * has no ground truth.
 */
typedef struct RfLabel {
  int64_t assigned_gt;
  uint8_t keep;
  uint8_t demoted;
  size_t rank;
} RfLabel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *rf_last_error_message(void);

double rf_iou(struct RfBox a, struct RfBox b);

double rf_giou(struct RfBox a, struct RfBox b);

/**
 * Minimum-cost assignment of a row-major `rows x cols` matrix.
 * `col_for_row[r]` receives the matched column or -1.
 *
 * # Safety
 * `cost` must point to `rows * cols` doubles and `col_for_row` to `rows` slots.
 */
enum RfStatus rf_hungarian(const double *cost,
                           size_t rows,
                           size_t cols,
                           int64_t *col_for_row,
                           double *total_cost);

/**
 * Confidence rank of each score, 0 for the highest.
 *
 * # Safety
 * `scores` and `ranks` must each hold `n` elements.
 */
enum RfStatus rf_rank_indices(const double *scores, size_t n, size_t *ranks);

/**
 * Greedy-matching labels with the default cost weights. Ranks follow the
 * detection scores.
 *
 * # Safety
 * `dets` and `labels` hold `n_dets` elements, `gts` holds `n_gts`.
 */
enum RfStatus rf_greedy_match(const struct RfDetection *dets,
                              size_t n_dets,
                              const struct RfGroundTruth *gts,
                              size_t n_gts,
                              size_t theta,
                              double iou_floor,
                              struct RfLabel *labels);

/**
 * Category-scoped NMS. Writes surviving indices in descending score order.
 *
 * # Safety
 * `dets` holds `n` elements; `out` has room for `n` indices.
 */
enum RfStatus rf_nms(const struct RfDetection *dets,
                     size_t n,
                     double iou_threshold,
                     size_t *out,
                     size_t *out_len);

/**
 * Indices of the `k` highest-scoring detections.
 *
 * # Safety
 * `dets` holds `n` elements; `out` has room for `min(n, k)` indices.
 */
enum RfStatus rf_topk(const struct RfDetection *dets,
                      size_t n,
                      size_t k,
                      size_t *out,
                      size_t *out_len);

/**
 * 101-point interpolated AP of a ranked TP (non-zero) / FP (zero) sequence.
 *
 * # Safety
 * `flags` holds `n` bytes.
 */
enum RfStatus rf_average_precision(const uint8_t *flags, size_t n, size_t n_gt, double *ap);

/**
 * Loads a checkpoint. Release the handle with [`rf_filter_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string.
 */
enum RfStatus rf_filter_load(const char *path, struct RfFilterModel **model);

/**
 * # Safety
 * `model` must come from [`rf_filter_load`] and not be used afterwards.
 */
void rf_filter_free(struct RfFilterModel *model);

/**
 * Keep probability of each candidate, ranked by its score.
 *
 * # Safety
 * `dets` and `probs` hold `n` elements.
 */
enum RfStatus rf_filter_score(const struct RfFilterModel *model,
                              const struct RfDetection *dets,
                              size_t n,
                              double *probs);

/**
 * Scores the candidates and keeps those whose rescored confidence exceeds
 * `conf_threshold`, in input order.
 *
 * # Safety
 * `dets` holds `n` elements; `out` has room for `n`.
 */
enum RfStatus rf_filter_apply(const struct RfFilterModel *model,
                              const struct RfDetection *dets,
                              size_t n,
                              double conf_threshold,
                              struct RfDetection *out,
                              size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RANKFILTER_H */
