#ifndef RETAIL_DR_H
#define RETAIL_DR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RdModel {
  RD_MODEL_MPEC = 0,
  RD_MODEL_EQ_MILP = 1,
  RD_MODEL_EQ_NLP = 2,
} RdModel;

typedef enum RdStatus {
  RD_STATUS_OK = 0,
  RD_STATUS_NULL_POINTER = 1,
  RD_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Bad case data or scenario parameters.
   */
  RD_STATUS_CONFIG = 3,
  RD_STATUS_SOLVER = 4,
  RD_STATUS_BUFFER_TOO_SMALL = 5,
  RD_STATUS_PANIC = 6,
} RdStatus;

/**
 * Opaque solve report.
 */
typedef struct RdReport RdReport;

/**
 * Opaque scenario set.
 */
typedef struct RdScenarioSet RdScenarioSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *rd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rd_version(void);

/**
 * Draws `n` scenarios of a named case (`BM`, `A`, `B`, `Flexibility`)
 * around the bundled spot series.
 *
 * # Safety
 * `case_name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RdStatus rd_scenarios_generate(const char *case_name,
                                    size_t n,
                                    uint64_t seed,
                                    struct RdScenarioSet **out);

/**
 * Builds a single-scenario set. `a` and `b` are consumer-major
 * (`consumers * hours` values each).
 *
 * # Safety
 * Each array must hold the stated number of values and `out` must be valid.
 */
enum RdStatus rd_scenarios_deterministic(size_t hours,
                                         size_t consumers,
                                         const double *spot,
                                         const double *a,
                                         const double *b,
                                         const double *delta_max,
                                         double penalty_c,
                                         struct RdScenarioSet **out);

/**
 * # Safety
 * `set` must come from an `rd_scenarios_*` constructor, or be null.
 */
void rd_scenarios_free(struct RdScenarioSet *set);

/**
 * # Safety
 * `set` must be a live handle; the out pointers may be null.
 */
enum RdStatus rd_scenarios_dims(const struct RdScenarioSet *set,
                                size_t *hours,
                                size_t *consumers,
                                size_t *scenarios);

/**
 * Solves `set` with default settings and the given seed.
 *
 * # Safety
 * `set` must be a live handle and `out` a valid pointer.
 */
enum RdStatus rd_solve(const struct RdScenarioSet *set,
                       enum RdModel model,
                       uint64_t seed,
                       struct RdReport **out);

/**
 * # Safety
 * `report` must come from [`rd_solve`], or be null.
 */
void rd_report_free(struct RdReport *report);

/**
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum RdStatus rd_report_expected_profit(const struct RdReport *report, double *out);

/**
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum RdStatus rd_report_total_welfare(const struct RdReport *report, double *out);

/**
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum RdStatus rd_report_average_tariff(const struct RdReport *report, double *out);

/**
 * Largest KKT residual of the reported point.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum RdStatus rd_report_max_residual(const struct RdReport *report, double *out);

/**
 * Copies the hourly tariff into `buf`. `len` is the capacity on entry; the
 * number of hours is stored in `*written` even when the buffer is too small.
 *
 * # Safety
 * `buf` must hold `len` values; `report` and `written` must be valid.
 */
enum RdStatus rd_report_tariff(const struct RdReport *report,
                               double *buf,
                               size_t len,
                               size_t *written);

/**
 * One consumer's best response to prices `p`. Writes consumption and shift
 * (`hours` values each).
 *
 * # Safety
 * All arrays must hold `hours` values.
 */
enum RdStatus rd_best_response(size_t hours,
                               const double *p,
                               const double *a,
                               const double *b,
                               double delta_max,
                               double *consumption,
                               double *shift);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RETAIL_DR_H */
