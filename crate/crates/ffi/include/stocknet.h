#ifndef STOCKNET_H
#define STOCKNET_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SnLagCriterion {
  SN_LAG_CRITERION_AIC = 0,
  SN_LAG_CRITERION_BIC = 1,
} SnLagCriterion;

typedef enum SnSkipReason {
  SN_SKIP_REASON_NONE = 0,
  SN_SKIP_REASON_INSUFFICIENT_DATA = 1,
  SN_SKIP_REASON_DEGENERATE_SERIES = 2,
  SN_SKIP_REASON_SINGULAR_FIT = 3,
  SN_SKIP_REASON_MISSING_SERIES = 4,
} SnSkipReason;

typedef enum SnStatus {
  SN_STATUS_OK = 0,
  SN_STATUS_NULL_POINTER = 1,
  SN_STATUS_INVALID_ARGUMENT = 2,
  SN_STATUS_IO = 3,
  SN_STATUS_FORMAT = 4,
  SN_STATUS_CHECKSUM = 5,
  SN_STATUS_DEGENERATE = 6,
  SN_STATUS_EMPTY_INPUT = 7,
  SN_STATUS_INTERNAL = 8,
  SN_STATUS_PANIC = 9,
} SnStatus;

/**
 * Opaque directed stock network.
 */
typedef struct SnNetwork SnNetwork;

/**
 * Topology summary. Undefined assortativity is NaN.
 */
typedef struct SnNetworkStats {
  double density;
  size_t node_count;
  size_t edge_count;
  double avg_degree;
  double in_assortativity;
  double out_assortativity;
  double weight_mean;
  double weight_std;
  double weight_sum;
  size_t scc_count;
  size_t wcc_count;
  size_t largest_scc;
  size_t largest_wcc;
} SnNetworkStats;

typedef struct SnGrangerConfig {
  double alpha;
  size_t max_lag;
  enum SnLagCriterion lag_criterion;
  size_t d_max;
  size_t min_valid_points;
  double min_variance;
} SnGrangerConfig;

/**
 * Result of one directed test. Numeric fields are NaN or 0 when skipped.
 */
typedef struct SnGrangerResult {
  bool tested;
  enum SnSkipReason skip_reason;
  double p_value;
  double wald_stat;
  size_t lag;
  bool reject;
} SnGrangerResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sn_version(void);

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *sn_last_error(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SnStatus sn_network_load(const char *path, struct SnNetwork **out);

/**
 * Builds the filtered network from a holdings CSV on `date` (YYYY-MM-DD).
 *
 * # Safety
 * `path` and `date` must be NUL-terminated strings and `out` a valid pointer.
 */
enum SnStatus sn_network_from_holdings(const char *path,
                                       const char *date,
                                       double k,
                                       struct SnNetwork **out);

/**
 * # Safety
 * `net` must come from this library and not be used afterwards. Null is a no-op.
 */
void sn_network_free(struct SnNetwork *net);

/**
 * # Safety
 * `net` must be a live handle and `out` a valid pointer.
 */
enum SnStatus sn_network_node_count(const struct SnNetwork *net, size_t *out);

/**
 * # Safety
 * `net` must be a live handle and `out` a valid pointer.
 */
enum SnStatus sn_network_edge_count(const struct SnNetwork *net, size_t *out);

/**
 * Endpoints (node indices) and weight in cents of edge `index`.
 *
 * # Safety
 * `net` must be a live handle; output pointers must be valid.
 */
enum SnStatus sn_network_edge(const struct SnNetwork *net,
                              size_t index,
                              size_t *source,
                              size_t *target,
                              uint64_t *weight_cents);

/**
 * Copies the id of node `index` into `buf` (NUL-terminated). `needed`
 * receives the buffer size required including the terminator.
 *
 * # Safety
 * `net` must be a live handle, `buf` valid for `len` bytes (may be null
 * when `len` is 0) and `needed` a valid pointer.
 */
enum SnStatus sn_network_node_id(const struct SnNetwork *net,
                                 size_t index,
                                 char *buf,
                                 size_t len,
                                 size_t *needed);

/**
 * # Safety
 * `net` must be a live handle and `out` a valid pointer.
 */
enum SnStatus sn_network_stats(const struct SnNetwork *net, struct SnNetworkStats *out);

/**
 * New handle keeping edges whose weight is at least the `k`-quantile.
 *
 * # Safety
 * `net` must be a live handle and `out` a valid pointer.
 */
enum SnStatus sn_network_filter(const struct SnNetwork *net, double k, struct SnNetwork **out);

/**
 * # Safety
 * `net` must be a live handle and `path` a NUL-terminated string.
 */
enum SnStatus sn_network_save(const struct SnNetwork *net, const char *path);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum SnStatus sn_granger_config_default(struct SnGrangerConfig *out);

/**
 * Tests whether `x` Granger-causes `y`. Both series hold `n` cumulative
 * changes on a shared minute grid; NaN marks a missing minute. A null
 * `config` uses the defaults.
 *
 * # Safety
 * `x` and `y` must be valid for `n` reads; `config` null or valid; `out` valid.
 */
enum SnStatus sn_granger_test(const double *x,
                              const double *y,
                              size_t n,
                              const struct SnGrangerConfig *config,
                              struct SnGrangerResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOCKNET_H */
