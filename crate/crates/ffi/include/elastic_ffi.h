#ifndef ELASTIC_FFI_H
#define ELASTIC_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ElasticPhase {
  ELASTIC_PHASE_WARMUP = 0,
  ELASTIC_PHASE_MEASURING = 1,
  ELASTIC_PHASE_AWAITING_RESOURCES = 2,
  ELASTIC_PHASE_RESTARTING = 3,
  ELASTIC_PHASE_DONE = 4,
} ElasticPhase;

typedef enum ElasticStatus {
  ELASTIC_STATUS_OK = 0,
  ELASTIC_STATUS_NULL_POINTER = 1,
  ELASTIC_STATUS_INVALID_UTF8 = 2,
  ELASTIC_STATUS_INVALID_INPUT = 3,
  ELASTIC_STATUS_DEGENERATE_WINDOW = 4,
  ELASTIC_STATUS_SINGULARITY = 5,
  ELASTIC_STATUS_OUT_OF_MODEL = 6,
  ELASTIC_STATUS_PROTOCOL = 7,
  ELASTIC_STATUS_CONSISTENCY = 8,
  ELASTIC_STATUS_CAPACITY = 9,
  ELASTIC_STATUS_SEQUENCING = 10,
  ELASTIC_STATUS_CONFIG = 11,
  ELASTIC_STATUS_TRACE_FORMAT = 12,
  ELASTIC_STATUS_IO = 13,
  ELASTIC_STATUS_PANIC = 14,
} ElasticStatus;

/**
 * Opaque controller handle.
 */
typedef struct ElasticController ElasticController;

/**
 * Opaque scenario handle.
 */
typedef struct ElasticScenario ElasticScenario;

typedef struct ElasticMetrics {
  double elapsed_time;
  double total_work;
  double max_work;
  double max_comm;
  double ce;
  double lb;
  double pe;
} ElasticMetrics;

typedef struct ElasticSummary {
  uint64_t total_steps;
  uint32_t optimization_steps;
  uint32_t final_cores;
  /**
   * NaN when no window was evaluated.
   */
  double final_window_ce;
  bool converged;
  uint64_t windows_evaluated;
  uint32_t overshoots;
  double simulated_time;
  double core_seconds;
  double baseline_core_seconds;
  double restart_overhead_total;
} ElasticSummary;

typedef struct ElasticControllerConfig {
  double ce_min;
  double ce_max;
  uint64_t averaging_period;
  double rate_of_change;
  uint32_t min_cores;
  uint32_t max_cores;
  uint32_t initial_cores;
  uint64_t starting_step;
  uint64_t total_steps;
} ElasticControllerConfig;

/**
 * Outcome of reporting one step to a controller.
 */
typedef struct ElasticStepResult {
  /**
   * The step closed an averaging window; `metrics` and `in_range` are set.
   */
  bool window_evaluated;
  struct ElasticMetrics metrics;
  bool in_range;
  /**
   * The window CE was at or above one and was pulled below one before estimating.
   */
  bool ce_clamped;
  bool resize_requested;
  uint32_t requested_cores;
} ElasticStepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the next failing call.
 */
const char *elastic_last_error_message(void);

/**
 * CE, LB and PE of one window given per-process work and communication times.
 *
 * # Safety
 * `work` and `comm` must point to `processes` readable values; `out` must be writable.
 */
enum ElasticStatus elastic_compute_metrics(const double *work,
                                           const double *comm,
                                           size_t processes,
                                           struct ElasticMetrics *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum ElasticStatus elastic_target_ce(double ce_min, double ce_max, double *out);

/**
 * Raw core count expected to reach `ce_target` from `ce` measured on `cores`.
 *
 * # Safety
 * `out` must be writable.
 */
enum ElasticStatus elastic_estimate_cores(uint32_t cores, double ce, double ce_target, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum ElasticStatus elastic_predict_ce(uint32_t cores, double ce, double n_star, double *out);

/**
 * Rounds a raw estimate and clamps it by rate of change and core bounds.
 *
 * # Safety
 * `out` must be writable.
 */
enum ElasticStatus elastic_clamp_and_round(double estimate,
                                           uint32_t current_cores,
                                           double rate_of_change,
                                           uint32_t min_cores,
                                           uint32_t max_cores,
                                           uint32_t *out);

/**
 * Parses a scenario from TOML text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum ElasticStatus elastic_scenario_from_str(const char *text, struct ElasticScenario **out);

/**
 * Loads a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ElasticStatus elastic_scenario_load(const char *path, struct ElasticScenario **out);

/**
 * Re-seeds the workload and cluster streams.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum ElasticStatus elastic_scenario_set_seed(struct ElasticScenario *scenario, uint64_t seed);

/**
 * Solver iterations the scenario's schedule prescribes at `step`.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum ElasticStatus elastic_scenario_iterations_at(const struct ElasticScenario *scenario,
                                                  uint64_t step,
                                                  uint64_t *out);

/**
 * Runs the scenario in memory.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum ElasticStatus elastic_scenario_run(const struct ElasticScenario *scenario,
                                        struct ElasticSummary *out);

/**
 * Runs the scenario, writing the CSV trace and key-value summary. `out` may be null.
 *
 * # Safety
 * `scenario` must be a live handle; paths must be NUL-terminated strings.
 */
enum ElasticStatus elastic_scenario_run_to_files(const struct ElasticScenario *scenario,
                                                 const char *trace_path,
                                                 const char *summary_path,
                                                 struct ElasticSummary *out);

/**
 * # Safety
 * `scenario` must be null or a handle not yet freed.
 */
void elastic_scenario_free(struct ElasticScenario *scenario);

/**
 * # Safety
 * `config` must be readable; `out` must be writable.
 */
enum ElasticStatus elastic_controller_new(const struct ElasticControllerConfig *config,
                                          struct ElasticController **out);

/**
 * Reports one completed step. `processes` must equal the current core count.
 *
 * # Safety
 * `controller` must be a live handle; `work` and `comm` must point to `processes`
 * readable values; `out` must be writable.
 */
enum ElasticStatus elastic_controller_on_step(struct ElasticController *controller,
                                              uint64_t step,
                                              const double *work,
                                              const double *comm,
                                              size_t processes,
                                              struct ElasticStepResult *out);

/**
 * # Safety
 * `controller` must be a live handle.
 */
enum ElasticStatus elastic_controller_grant(struct ElasticController *controller,
                                            uint32_t cores,
                                            uint64_t step);

/**
 * # Safety
 * `controller` must be a live handle.
 */
enum ElasticStatus elastic_controller_restart_complete(struct ElasticController *controller,
                                                       uint64_t step);

/**
 * # Safety
 * `controller` must be a live handle.
 */
enum ElasticStatus elastic_controller_deny(struct ElasticController *controller, uint64_t step);

/**
 * # Safety
 * `controller` must be a live handle; both out-pointers must be writable.
 */
enum ElasticStatus elastic_controller_state(const struct ElasticController *controller,
                                            enum ElasticPhase *phase,
                                            uint32_t *current_cores);

/**
 * # Safety
 * `controller` must be null or a handle not yet freed.
 */
void elastic_controller_free(struct ElasticController *controller);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELASTIC_FFI_H */
