#ifndef MEV_CORE_H
#define MEV_CORE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MevStatus {
  MEV_STATUS_OK = 0,
  MEV_STATUS_NULL_POINTER = 1,
  MEV_STATUS_INVALID_ARGUMENT = 2,
  MEV_STATUS_INVALID_GAME = 3,
  MEV_STATUS_TOO_LARGE = 4,
  MEV_STATUS_NOT_SUBMODULAR = 5,
  MEV_STATUS_ACTIVE_VALIDATOR = 6,
  MEV_STATUS_PARSE = 7,
  MEV_STATUS_IO = 8,
  MEV_STATUS_PANIC = 9,
} MevStatus;

/**
 * Opaque bundle-matrix handle.
 */
typedef struct MevBundleMatrix MevBundleMatrix;

/**
 * Opaque game handle.
 */
typedef struct MevGame MevGame;

/**
 * Closed-form event probabilities; the conditional one is NaN when the
 * block is surely empty.
 */
typedef struct MevExactProbabilities {
  double p_y_lt2;
  double p_all_covered_twice;
  double p_all_singletons;
  double p_zero_block;
  double p_validator_takes_all;
  double p_searchers_take_all_given_positive;
} MevExactProbabilities;

/**
 * Monte Carlo configuration. `capacity < 0` means unconstrained.
 */
typedef struct MevSimConfig {
  size_t n;
  size_t m;
  double p;
  int64_t capacity;
  uint64_t trials;
  uint64_t seed;
} MevSimConfig;

/**
 * Monte Carlo frequencies. Conditional fields are NaN when undefined.
 */
typedef struct MevSimReport {
  double freq_validator_takes_all;
  double stderr_validator_takes_all;
  double freq_all_covered_twice;
  double stderr_all_covered_twice;
  double freq_all_singletons;
  double stderr_all_singletons;
  double freq_zero_block;
  double stderr_zero_block;
  uint64_t positive_trials;
  double freq_searchers_take_all_given_positive;
  double stderr_searchers_take_all_given_positive;
  double mean_block_value;
  double mean_floor;
} MevSimReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *mev_last_error_message(void);

/**
 * Parses a game from JSON: `{"n_searchers": n, "blocks": [...]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum MevStatus mev_game_from_json(const char *json, struct MevGame **out);

/**
 * Expands a bundle matrix into a game; `capacity < 0` means unconstrained.
 *
 * # Safety
 * `matrix` must be a live handle; `out` must be writable.
 */
enum MevStatus mev_game_from_matrix(const struct MevBundleMatrix *matrix,
                                    int64_t capacity_k,
                                    struct MevGame **out);

/**
 * # Safety
 * `game` must be null or a handle not yet freed.
 */
void mev_game_free(struct MevGame *game);

/**
 * # Safety
 * `game` must be a live handle; `out` must be writable.
 */
enum MevStatus mev_game_n_searchers(const struct MevGame *game, size_t *out);

/**
 * Value of the coalition given as a bitmask over searchers.
 *
 * # Safety
 * `game` must be a live handle; `out` must be writable.
 */
enum MevStatus mev_game_coalition_value(const struct MevGame *game, uint64_t mask, double *out);

/**
 * # Safety
 * `game` must be a live handle; `out` must be writable.
 */
enum MevStatus mev_game_marginal(const struct MevGame *game, size_t searcher, double *out);

/**
 * # Safety
 * `game` must be a live handle; `out` must be writable.
 */
enum MevStatus mev_game_is_submodular(const struct MevGame *game, bool *out);

/**
 * Core membership by enumerating every coalition.
 *
 * # Safety
 * `shares` must point to `n` doubles; `game` must be a live handle; `out`
 * must be writable.
 */
enum MevStatus mev_game_in_core(const struct MevGame *game,
                                const double *shares,
                                size_t n,
                                double validator_share,
                                bool *out);

/**
 * Core membership through marginal bounds; fails with
 * `NotSubmodular` when the bounds do not characterize the core.
 *
 * # Safety
 * As for [`mev_game_in_core`].
 */
enum MevStatus mev_game_in_core_by_bounds(const struct MevGame *game,
                                          const double *shares,
                                          size_t n,
                                          double validator_share,
                                          bool *out);

/**
 * Searcher-optimal core point: marginals to searchers, residual to the
 * validator.
 *
 * # Safety
 * `shares_out` must have room for `n` doubles; other pointers writable.
 */
enum MevStatus mev_game_searcher_optimal(const struct MevGame *game,
                                         double *shares_out,
                                         size_t n,
                                         double *validator_out);

/**
 * VCG payments at the welfare-maximizing block (lowest index on ties).
 *
 * # Safety
 * `payments_out` must have room for `n` doubles; `block_out` writable.
 */
enum MevStatus mev_game_vcg(const struct MevGame *game,
                            double *payments_out,
                            size_t n,
                            size_t *block_out);

/**
 * Grand-coalition value, searcher marginals (room for `n`) in one pass.
 *
 * # Safety
 * `marginals_out` must have room for `n` doubles; `grand_out` writable.
 */
enum MevStatus mev_game_value_summary(const struct MevGame *game,
                                      double *marginals_out,
                                      size_t n,
                                      double *grand_out);

/**
 * Builds an `m × n` matrix from row-major values (row = opportunity).
 *
 * # Safety
 * `values` must point to `m * n` doubles; `out` must be writable.
 */
enum MevStatus mev_matrix_new(const double *values,
                              size_t m,
                              size_t n,
                              struct MevBundleMatrix **out);

/**
 * Reads a matrix from CSV text with header `s0,...,s{n-1}`.
 *
 * # Safety
 * `csv` must be a NUL-terminated string; `out` must be writable.
 */
enum MevStatus mev_matrix_from_csv(const char *csv, struct MevBundleMatrix **out);

/**
 * # Safety
 * `matrix` must be null or a handle not yet freed.
 */
void mev_matrix_free(struct MevBundleMatrix *matrix);

/**
 * Block value of the grand coalition: the sum of per-opportunity maxima.
 *
 * # Safety
 * `matrix` must be a live handle; `out` must be writable.
 */
enum MevStatus mev_matrix_block_value(const struct MevBundleMatrix *matrix, double *out);

/**
 * Validator floor: the sum of per-opportunity second-highest values.
 *
 * # Safety
 * `matrix` must be a live handle; `out` must be writable.
 */
enum MevStatus mev_matrix_validator_floor(const struct MevBundleMatrix *matrix, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum MevStatus mev_exact_probabilities(size_t n,
                                       size_t m,
                                       double p,
                                       struct MevExactProbabilities *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum MevStatus mev_calibrate_p(size_t n, double clash_fraction, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum MevStatus mev_solve_phi(double alpha, double *out);

/**
 * # Safety
 * `config` must be readable; `out` must be writable.
 */
enum MevStatus mev_simulate(const struct MevSimConfig *config, struct MevSimReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEV_CORE_H */
