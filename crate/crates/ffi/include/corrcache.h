#ifndef CORRCACHE_H
#define CORRCACHE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call. Values 1 to 3 match the command-line exit codes.
 */
typedef enum CorrcacheStatus {
  CORRCACHE_STATUS_OK = 0,
  CORRCACHE_STATUS_IO = 1,
  /**
   * Invalid configuration, parse failure or out-of-domain argument.
   */
  CORRCACHE_STATUS_CONFIG = 2,
  CORRCACHE_STATUS_CONSISTENCY = 3,
  CORRCACHE_STATUS_NULL_POINTER = 4,
  CORRCACHE_STATUS_INVALID_UTF8 = 5,
  /**
   * The requested client, group or object is not present.
   */
  CORRCACHE_STATUS_NOT_FOUND = 6,
  CORRCACHE_STATUS_PANIC = 7,
} CorrcacheStatus;

typedef struct CorrcacheMetrics CorrcacheMetrics;

typedef struct CorrcacheModel CorrcacheModel;

typedef struct CorrcacheReport CorrcacheReport;

typedef struct CorrcacheTrace CorrcacheTrace;

/**
 * Aggregate counts of one simulation.
 */
typedef struct CorrcacheSummary {
  uint64_t trace_events;
  uint64_t local_hits;
  /**
   * Requests that reached the main cache.
   */
  uint64_t requests;
  uint64_t hits;
  uint64_t evictions;
  /**
   * `hits / requests`, NaN when there were no requests.
   */
  double hit_ratio;
} CorrcacheSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *corrcache_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *corrcache_version(void);

/**
 * Generates a trace from a preset name or the text of a workload TOML
 * file, with the horizon or slot count multiplied by `scale`.
 *
 * # Safety
 * `source` must be a valid NUL-terminated string and `out` writable.
 */
enum CorrcacheStatus corrcache_trace_generate(const char *source,
                                              uint64_t seed,
                                              double scale,
                                              struct CorrcacheTrace **out);

/**
 * Reads a trace file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` writable.
 */
enum CorrcacheStatus corrcache_trace_read(const char *path, struct CorrcacheTrace **out);

/**
 * Writes a trace file.
 *
 * # Safety
 * `trace` must come from this library; `path` must be a valid string.
 */
enum CorrcacheStatus corrcache_trace_write(const struct CorrcacheTrace *trace, const char *path);

/**
 * Number of events, 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or come from this library.
 */
size_t corrcache_trace_len(const struct CorrcacheTrace *trace);

/**
 * Sum of all catalogued object sizes, 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or come from this library.
 */
uint64_t corrcache_trace_total_volume(const struct CorrcacheTrace *trace);

/**
 * # Safety
 * `trace` must be NULL or an unfreed handle from this library.
 */
void corrcache_trace_free(struct CorrcacheTrace *trace);

/**
 * Replays `trace` through a cache of `capacity` bytes. `policy` uses the
 * command-line syntax, e.g. `lru` or `lfrus:2:0.5`; `local_frac` sizes the
 * per-client local caches.
 *
 * # Safety
 * `trace` must come from this library, `policy` must be a valid string and
 * `out` writable.
 */
enum CorrcacheStatus corrcache_simulate(const struct CorrcacheTrace *trace,
                                        const char *policy,
                                        uint64_t capacity,
                                        double local_frac,
                                        uint64_t seed,
                                        struct CorrcacheMetrics **out);

/**
 * # Safety
 * `metrics` must come from this library and `out` be writable.
 */
enum CorrcacheStatus corrcache_metrics_summary(const struct CorrcacheMetrics *metrics,
                                               struct CorrcacheSummary *out);

/**
 * Main-cache hit ratio of one client (ids as in the trace).
 *
 * # Safety
 * `metrics` must come from this library and `out` be writable.
 */
enum CorrcacheStatus corrcache_metrics_client_hit_ratio(const struct CorrcacheMetrics *metrics,
                                                        uint32_t client,
                                                        double *out);

/**
 * # Safety
 * `metrics` must be NULL or an unfreed handle from this library.
 */
void corrcache_metrics_free(struct CorrcacheMetrics *metrics);

/**
 * Builds the working-set model of a grouped preset or workload text.
 *
 * # Safety
 * `source` must be a valid NUL-terminated string and `out` writable.
 */
enum CorrcacheStatus corrcache_model_new(const char *source, struct CorrcacheModel **out);

/**
 * Sum of all object sizes in the model.
 *
 * # Safety
 * `model` must be NULL or come from this library.
 */
double corrcache_model_total_volume(const struct CorrcacheModel *model);

/**
 * # Safety
 * `model` must be NULL or an unfreed handle from this library.
 */
void corrcache_model_free(struct CorrcacheModel *model);

/**
 * Solves for the characteristic time at `capacity` and tabulates every
 * client's hit probability. `mc_samples` of 0 keeps the default.
 *
 * # Safety
 * `model` must come from this library and `out` be writable.
 */
enum CorrcacheStatus corrcache_model_solve(const struct CorrcacheModel *model,
                                           double capacity,
                                           size_t mc_samples,
                                           uint64_t mc_seed,
                                           struct CorrcacheReport **out);

/**
 * The solved characteristic time, NaN for NULL.
 *
 * # Safety
 * `report` must be NULL or come from this library.
 */
double corrcache_report_t_star(const struct CorrcacheReport *report);

/**
 * Hit probability of one client for one object. `group` is zero-based;
 * `follower` is 0 for the leader and 1-based for followers.
 *
 * # Safety
 * `report` must come from this library and `out` be writable.
 */
enum CorrcacheStatus corrcache_report_hit_prob(const struct CorrcacheReport *report,
                                               size_t group,
                                               size_t follower,
                                               uint32_t object,
                                               double *out);

/**
 * # Safety
 * `report` must be NULL or an unfreed handle from this library.
 */
void corrcache_report_free(struct CorrcacheReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CORRCACHE_H */
