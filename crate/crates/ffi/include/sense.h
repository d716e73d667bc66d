#ifndef SENSE_H
#define SENSE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SenseStatus {
  SENSE_STATUS_OK = 0,
  SENSE_STATUS_NULL_POINTER = 1,
  SENSE_STATUS_INVALID_ARGUMENT = 2,
  SENSE_STATUS_CONFIG = 3,
  SENSE_STATUS_RUNTIME = 4,
  SENSE_STATUS_OUT_OF_RANGE = 5,
  SENSE_STATUS_PANIC = 6,
} SenseStatus;

/**
 * Output of one simulation run.
 */
typedef struct SenseRun SenseRun;

/**
 * A parsed scenario.
 */
typedef struct SenseScenario SenseScenario;

typedef struct SenseSummary {
  uint64_t tuples;
  uint64_t measured;
  double within_cgmax;
  int64_t median_cg_ns;
  int64_t median_ce_ns;
  int64_t median_dt_ns;
  int64_t median_delta_ns;
  uint64_t soundness_violations;
  uint64_t degraded;
  uint64_t total_reads;
  uint32_t final_loop_count;
} SenseSummary;

/**
 * One result tuple. `c_real_ns` is -1 when no ground truth was recorded.
 */
typedef struct SenseTuple {
  uint64_t seq;
  int64_t t_ns;
  int64_t l_s_ns;
  int64_t c_g_ns;
  int64_t c_e_ns;
  int64_t delta_ns;
  int64_t delta_t_ns;
  int64_t d_max_ns;
  int64_t c_real_ns;
  uint32_t loop_count;
  bool degraded;
} SenseTuple;

/**
 * Source position (m) and its distance `a` (m) to the third sensor.
 */
typedef struct SenseLocation {
  double x;
  double y;
  double a;
} SenseLocation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into this library from the same thread.
 */
const char *sense_last_error(void);

/**
 * Parses a scenario from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SenseStatus sense_scenario_from_toml(const char *toml, struct SenseScenario **out);

/**
 * Loads a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SenseStatus sense_scenario_load(const char *path, struct SenseScenario **out);

/**
 * # Safety
 * `scenario` must come from this library and not be freed.
 */
enum SenseStatus sense_scenario_set_seed(struct SenseScenario *scenario, uint64_t seed);

/**
 * # Safety
 * `scenario` must come from this library, or be NULL.
 */
void sense_scenario_free(struct SenseScenario *scenario);

/**
 * Runs the simulation without writing files.
 *
 * # Safety
 * `scenario` must come from this library; `out` must be a valid pointer.
 */
enum SenseStatus sense_run(const struct SenseScenario *scenario, struct SenseRun **out);

/**
 * # Safety
 * `run` must come from this library; `out` must be a valid pointer.
 */
enum SenseStatus sense_run_summary(const struct SenseRun *run, struct SenseSummary *out);

/**
 * Number of emitted tuples; 0 for NULL.
 *
 * # Safety
 * `run` must come from this library, or be NULL.
 */
size_t sense_run_tuple_count(const struct SenseRun *run);

/**
 * # Safety
 * `run` must come from this library; `out` must be a valid pointer.
 */
enum SenseStatus sense_run_tuple(const struct SenseRun *run, size_t index, struct SenseTuple *out);

/**
 * # Safety
 * `run` must come from this library, or be NULL.
 */
void sense_run_free(struct SenseRun *run);

/**
 * Coherence guarantee in ns from loop start/end and the extreme value ages.
 *
 * # Safety
 * `out_ns` must be a valid pointer.
 */
enum SenseStatus sense_coherence_guarantee(int64_t l_s_ns,
                                           int64_t l_e_ns,
                                           int64_t alpha_min_ns,
                                           int64_t alpha_max_ns,
                                           int64_t *out_ns);

/**
 * Coherence estimate in ns from the extreme reported read times.
 *
 * # Safety
 * `out_ns` must be a valid pointer.
 */
enum SenseStatus sense_coherence_estimate(int64_t t_min_ns, int64_t t_max_ns, int64_t *out_ns);

/**
 * Locates a source from range differences `d1 = r1 - r3` and `d2 = r2 - r3`.
 * `sensors` holds x1, y1, x2, y2, x3, y3.
 *
 * # Safety
 * `sensors` must point to six doubles; `out` must be a valid pointer.
 */
enum SenseStatus sense_locate(const double *sensors,
                              double speed,
                              double d1,
                              double d2,
                              struct SenseLocation *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SENSE_H */
