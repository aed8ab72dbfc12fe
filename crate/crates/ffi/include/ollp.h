#ifndef OLLP_H
#define OLLP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OllpExperimentKind {
  OLLP_EXPERIMENT_KIND_DPMD_VS_M = 0,
  OLLP_EXPERIMENT_KIND_DPMD_TRACE = 1,
  OLLP_EXPERIMENT_KIND_OGD_SMALL_WINDOW = 2,
  OLLP_EXPERIMENT_KIND_LOWER_BOUND_CHECK = 3,
} OllpExperimentKind;

typedef enum OllpGeometryKind {
  /**
   * `[-1, 1]^dim` with `psi = |x|^2 / 2`.
   */
  OLLP_GEOMETRY_KIND_EUCLIDEAN = 0,
  /**
   * Probability simplex of dimension `dim` with negative entropy.
   */
  OLLP_GEOMETRY_KIND_ENTROPY = 1,
} OllpGeometryKind;

typedef enum OllpPredictor {
  OLLP_PREDICTOR_FIRST = 0,
  OLLP_PREDICTOR_SECOND = 1,
} OllpPredictor;

/**
 * Result code of every call.
 */
typedef enum OllpStatus {
  OLLP_STATUS_OK = 0,
  OLLP_STATUS_NULL_POINTER = 1,
  OLLP_STATUS_INVALID_ARGUMENT = 2,
  OLLP_STATUS_DOMAIN_VIOLATION = 3,
  OLLP_STATUS_PRECONDITION = 4,
  OLLP_STATUS_CONSISTENCY = 5,
  OLLP_STATUS_IO = 6,
  OLLP_STATUS_PANIC = 7,
} OllpStatus;

/**
 * DPMD learner over linear losses.
 */
typedef struct OllpDpmd OllpDpmd;

/**
 * Delayed online gradient descent over linear losses.
 */
typedef struct OllpOgd OllpOgd;

typedef struct OllpReport OllpReport;

/**
 * Parameters of [`ollp_experiment_run`]. Zero or negative values select
 * the defaults where noted.
 */
typedef struct OllpExperimentParams {
  enum OllpExperimentKind experiment;
  size_t horizon;
  size_t tau;
  /**
   * Window sizes; may be null when `n_windows` is 0 (default grid).
   */
  const size_t *windows;
  size_t n_windows;
  size_t reps;
  uint64_t seed;
  /**
   * Only `[-1, 1]` (`dim` 1) and the 2-simplex are supported here.
   */
  enum OllpGeometryKind geometry;
  /**
   * `<= 0`: default step.
   */
  double eta_f;
  /**
   * `<= 0`: default step.
   */
  double eta_s;
  /**
   * 0: block length `tau`.
   */
  size_t block;
  /**
   * Negative: default gap.
   */
  int64_t gap;
  /**
   * 0: default stride.
   */
  size_t trace_stride;
} OllpExperimentParams;

/**
 * One aggregate line of a report.
 */
typedef struct OllpAggregateRow {
  size_t horizon;
  size_t tau;
  size_t window;
  size_t reps;
  double mean_regret;
  double std_error;
  double adversarial_ref;
  double stochastic_ref;
} OllpAggregateRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ollp_last_error(void);

/**
 * Writes `mirror_step(w, g, eta)` to `out` (length `dim`).
 *
 * # Safety
 * `w`, `g` and `out` must point to `dim` doubles.
 */
enum OllpStatus ollp_mirror_step(enum OllpGeometryKind kind,
                                 size_t dim,
                                 const double *w,
                                 const double *g,
                                 double eta,
                                 double *out);

/**
 * # Safety
 * `x` and `y` must point to `dim` doubles; `out` to one.
 */
enum OllpStatus ollp_bregman_divergence(enum OllpGeometryKind kind,
                                        size_t dim,
                                        const double *x,
                                        const double *y,
                                        double *out);

/**
 * Bound on the distance between consecutive iterates for step `eta` and
 * gradient bound `grad_bound`. Fails with `PRECONDITION` for the entropy
 * map when `eta >= 1/(sqrt(2) grad_bound)`.
 *
 * # Safety
 * `out` must point to one double.
 */
enum OllpStatus ollp_step_gap_bound(enum OllpGeometryKind kind,
                                    size_t dim,
                                    double eta,
                                    double grad_bound,
                                    double *out);

/**
 * Creates a DPMD learner for horizon `horizon`, windows of `block` rounds
 * and delay `tau`. Non-positive `eta_f` / `eta_s` select the default step
 * sizes for gradients bounded by `grad_bound`. A final block shorter than
 * `block` is allowed.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum OllpStatus ollp_dpmd_new(enum OllpGeometryKind kind,
                              size_t dim,
                              size_t horizon,
                              size_t block,
                              size_t tau,
                              double grad_bound,
                              double eta_f,
                              double eta_s,
                              struct OllpDpmd **out);

/**
 * Plays one round. `released` holds the coefficients of the linear loss
 * released this round (from `tau` rounds back), or is null when nothing
 * is released. The prediction is written to `out_point` (length `dim`).
 *
 * # Safety
 * `handle` must come from [`ollp_dpmd_new`]; `released` must be null or
 * point to `dim` doubles; `out_point` to `dim` doubles; `out_predictor`
 * may be null.
 */
enum OllpStatus ollp_dpmd_round(struct OllpDpmd *handle,
                                const double *released,
                                size_t dim,
                                double *out_point,
                                enum OllpPredictor *out_predictor);

/**
 * # Safety
 * `handle` must be null or come from [`ollp_dpmd_new`] and not be used
 * afterwards.
 */
void ollp_dpmd_free(struct OllpDpmd *handle);

/**
 * Delayed online gradient descent with fixed step `eta` (non-positive:
 * `1/sqrt(horizon)`).
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum OllpStatus ollp_ogd_new(enum OllpGeometryKind kind,
                             size_t dim,
                             size_t horizon,
                             size_t tau,
                             double eta,
                             struct OllpOgd **out);

/**
 * Same contract as [`ollp_dpmd_round`] without the predictor output.
 *
 * # Safety
 * See [`ollp_dpmd_round`].
 */
enum OllpStatus ollp_ogd_round(struct OllpOgd *handle,
                               const double *released,
                               size_t dim,
                               double *out_point);

/**
 * # Safety
 * `handle` must be null or come from [`ollp_ogd_new`] and not be used
 * afterwards.
 */
void ollp_ogd_free(struct OllpOgd *handle);

/**
 * Runs an experiment. On success `*out` owns a report, even when the run
 * stopped early (see [`ollp_report_failure`]).
 *
 * # Safety
 * `params` must point to a valid parameter block whose `windows` array
 * has `n_windows` entries; `out` must be a valid handle slot.
 */
enum OllpStatus ollp_experiment_run(const struct OllpExperimentParams *params,
                                    struct OllpReport **out);

/**
 * Number of aggregate rows (windows completed).
 *
 * # Safety
 * `report` must be null or a live report.
 */
size_t ollp_report_len(const struct OllpReport *report);

/**
 * # Safety
 * `report` must be a live report and `out` point to a row.
 */
enum OllpStatus ollp_report_row(const struct OllpReport *report,
                                size_t index,
                                struct OllpAggregateRow *out);

/**
 * Failure message of a run that stopped early, or null. Valid while the
 * report lives.
 *
 * # Safety
 * `report` must be null or a live report.
 */
const char *ollp_report_failure(const struct OllpReport *report);

/**
 * Writes the report as CSV (traces for trace experiments, otherwise the
 * aggregate table).
 *
 * # Safety
 * `report` must be a live report and `path` a nul-terminated UTF-8 path.
 */
enum OllpStatus ollp_report_write_csv(const struct OllpReport *report, const char *path);

/**
 * # Safety
 * `report` must be null or a live report not used afterwards.
 */
void ollp_report_free(struct OllpReport *report);

/**
 * Monte-Carlo estimate of `block * E|sum of T/block fair signs|`.
 *
 * # Safety
 * `mean` and `std_error` must point to doubles.
 */
enum OllpStatus ollp_khintchine_oracle(size_t horizon,
                                       size_t block,
                                       size_t reps,
                                       uint64_t seed,
                                       double *mean,
                                       double *std_error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OLLP_H */
