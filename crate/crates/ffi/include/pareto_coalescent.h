#ifndef PARETO_COALESCENT_H
#define PARETO_COALESCENT_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PC_WARN_WEIGHT_DEGENERACY 1

#define PC_WARN_VARIANCE_MAY_BE_INFINITE 2

#define PC_WARN_CANCELLATION 4

#define PC_WARN_TRUNCATED 8

/**
 * Status codes returned by every fallible function.
 */
typedef enum PcStatus {
  PC_STATUS_OK = 0,
  PC_STATUS_NULL_POINTER = 1,
  PC_STATUS_INVALID_PARAMETER = 2,
  PC_STATUS_DOMAIN = 3,
  PC_STATUS_POLE = 4,
  PC_STATUS_OUT_OF_TABLE = 5,
  PC_STATUS_SIZE_LIMIT = 6,
  PC_STATUS_UNBRACKETED = 7,
  PC_STATUS_PANIC = 8,
} PcStatus;

/**
 * Partition family for [`pc_estimate_c_n`].
 */
typedef enum PcFamily {
  PC_FAMILY_PARETO = 0,
  PC_FAMILY_GAMMA = 1,
} PcFamily;

/**
 * Opaque rate or probability table.
 */
typedef struct PcRateTable PcRateTable;

/**
 * Opaque random stream.
 */
typedef struct PcRng PcRng;

/**
 * Monte Carlo estimate with its standard error.
 */
typedef struct PcEstimate {
  double value;
  double std_error;
  double ess;
  uint64_t replicas;
  /**
   * Bitwise OR of `PC_WARN_*` flags.
   */
  uint32_t warnings;
} PcEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pc_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next library call on the same thread.
 */
const char *pc_last_error_message(void);

/**
 * New random stream; never returns NULL.
 */
struct PcRng *pc_rng_new(uint64_t seed, uint64_t stream_index);

/**
 * Independent stream number `k` derived from `rng`; NULL if `rng` is NULL.
 *
 * # Safety
 * `rng` must be NULL or a live handle from `pc_rng_new`/`pc_rng_replica`.
 */
struct PcRng *pc_rng_replica(const struct PcRng *rng, uint64_t k);

/**
 * # Safety
 * `rng` must be NULL or a live handle; it is invalid afterwards.
 */
void pc_rng_free(struct PcRng *rng);

/**
 * Uniform variate on the open interval (0, 1).
 *
 * # Safety
 * `rng` must be a live handle and `out` writable.
 */
enum PcStatus pc_rng_uniform(struct PcRng *rng, double *out);

/**
 * Pareto(α) variate with tail `x^{−α}` on `[1, ∞)`.
 *
 * # Safety
 * `rng` must be a live handle and `out` writable.
 */
enum PcStatus pc_rng_pareto(struct PcRng *rng, double alpha, double *out);

/**
 * Rate table (Λ regimes) or transition matrix (Ξ regime) for `(α, β)`.
 *
 * # Safety
 * `out` must be writable; on success `*out` holds a handle to release with
 * `pc_rate_table_free`.
 */
enum PcStatus pc_rate_table_new(double alpha,
                                double beta,
                                uint32_t i_max,
                                struct PcRateTable **out);

/**
 * # Safety
 * `table` must be NULL or a live handle; it is invalid afterwards.
 */
void pc_rate_table_free(struct PcRateTable *table);

/**
 * Largest state of the table, or 0 for NULL.
 *
 * # Safety
 * `table` must be NULL or a live handle.
 */
uint32_t pc_rate_table_i_max(const struct PcRateTable *table);

/**
 * 1 for a probability table, 0 for rates or NULL.
 *
 * # Safety
 * `table` must be NULL or a live handle.
 */
int32_t pc_rate_table_is_probability(const struct PcRateTable *table);

/**
 * Entry `(i, j)`; zero where the table has no entry.
 *
 * # Safety
 * `table` must be a live handle and `out` writable.
 */
enum PcStatus pc_rate_table_get(const struct PcRateTable *table,
                                uint32_t i,
                                uint32_t j,
                                double *out);

/**
 * Row sum of state `i`.
 *
 * # Safety
 * `table` must be a live handle and `out` writable.
 */
enum PcStatus pc_rate_table_total(const struct PcRateTable *table, uint32_t i, double *out);

/**
 * `λ_{i,j}` of the beta(2−α, α−β) coalescent, `1 <= α < 2`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PcStatus pc_lambda_rate(double alpha, double beta, uint32_t i, uint32_t j, double *out);

/**
 * Leading-order `c_N` for Pareto(α) partitions.
 *
 * # Safety
 * `out` must be writable.
 */
enum PcStatus pc_c_n_asymptotic(double alpha, double beta, uint64_t n, double *out);

/**
 * Monte Carlo `c_N` for Pareto(`shape`) or gamma(`shape`) partitions of
 * size `n`, tilted by `Σ^β`.
 *
 * # Safety
 * `rng` must be a live handle and `out` writable.
 */
enum PcStatus pc_estimate_c_n(enum PcFamily family,
                              double shape,
                              uint64_t n,
                              double beta,
                              uint64_t replicas,
                              const struct PcRng *rng,
                              struct PcEstimate *out);

/**
 * Per-generation growth of the log Hölder mean in the forward model.
 *
 * # Safety
 * `rng` must be a live handle and `out` writable.
 */
enum PcStatus pc_speed_estimate(uint64_t n,
                                double alpha,
                                uint64_t generations,
                                uint64_t replicas,
                                const struct PcRng *rng,
                                struct PcEstimate *out);

/**
 * Pressure `F_N(β)` of the forward model.
 *
 * # Safety
 * `out` must be writable.
 */
enum PcStatus pc_pressure(double alpha, uint64_t n, double beta, double *out);

/**
 * `ln Γ(x)` for `x > 0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PcStatus pc_log_gamma(double x, double *out);

/**
 * `ln |Γ(x)|` and the sign of `Γ(x)` away from the poles.
 *
 * # Safety
 * `out_log` and `out_sign` must be writable.
 */
enum PcStatus pc_log_abs_gamma(double x, double *out_log, double *out_sign);

/**
 * `ψ(x)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PcStatus pc_digamma(double x, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARETO_COALESCENT_H */
