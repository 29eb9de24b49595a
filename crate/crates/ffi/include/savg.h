#ifndef SAVG_H
#define SAVG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum SavgStatus {
  SAVG_STATUS_OK = 0,
  SAVG_STATUS_NULL_POINTER = 1,
  SAVG_STATUS_INVALID_ARGUMENT = 2,
  // Degenerate or ill-conditioned simplex.
  SAVG_STATUS_DEGENERATE = 3,
  SAVG_STATUS_SIMULATION = 4,
  SAVG_STATUS_IO = 5,
  SAVG_STATUS_CONFIG = 6,
  // A caught panic or another internal failure.
  SAVG_STATUS_INTERNAL = 7,
} SavgStatus;

typedef struct SavgBatch SavgBatch;

typedef struct SavgGenerator SavgGenerator;

typedef struct SavgModel SavgModel;

typedef struct SavgSimplex SavgSimplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failed call on this thread, or null. The
// pointer stays valid until the next `savg_*` call on the same thread.
const char *savg_last_error(void);

// Library version as a static nul-terminated string.
const char *savg_version(void);

// Builds a simplex from `n_vertices` row-major vertices of `dim` coordinates.
//
// # Safety
// `vertices` must point to `n_vertices * dim` readable doubles and `out` to
// writable storage for one handle.
enum SavgStatus savg_simplex_new(const double *vertices,
                                 size_t n_vertices,
                                 size_t dim,
                                 struct SavgSimplex **out);

// # Safety
// `simplex` must be null or a handle from `savg_simplex_new` not yet freed.
void savg_simplex_free(struct SavgSimplex *simplex);

// Dimension of the ambient space, or 0 for a null handle.
//
// # Safety
// `simplex` must be null or a live handle.
size_t savg_simplex_dim(const struct SavgSimplex *simplex);

// Barycentric coordinates of `x` (length `dim`) into `out` (length `dim + 1`).
//
// # Safety
// Buffers must match the stated lengths.
enum SavgStatus savg_simplex_barycentric(const struct SavgSimplex *simplex,
                                         const double *x,
                                         size_t x_len,
                                         double *out,
                                         size_t out_len);

// Instantiates a builtin model on `simplex`. `params_json` is a JSON object
// of parameters, or null for the defaults.
//
// # Safety
// Strings must be nul-terminated; handles must be live.
enum SavgStatus savg_model_builtin(const char *name,
                                   const char *params_json,
                                   const struct SavgSimplex *simplex,
                                   struct SavgModel **out);

// # Safety
// `model` must be null or a live handle.
void savg_model_free(struct SavgModel *model);

// The limit jump generator of `model` on `simplex`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum SavgStatus savg_generator_build(const struct SavgModel *model,
                                     const struct SavgSimplex *simplex,
                                     struct SavgGenerator **out);

// # Safety
// `generator` must be null or a live handle.
void savg_generator_free(struct SavgGenerator *generator);

// Number of states, or 0 for a null handle.
//
// # Safety
// `generator` must be null or a live handle.
size_t savg_generator_size(const struct SavgGenerator *generator);

// Copies the rate matrix into `out` (`size * size`, row-major).
//
// # Safety
// `out` must hold `out_len` doubles.
enum SavgStatus savg_generator_rates(const struct SavgGenerator *generator,
                                     double *out,
                                     size_t out_len);

// `exp(tQ)` into `out` (`size * size`, row-major).
//
// # Safety
// `out` must hold `out_len` doubles.
enum SavgStatus savg_generator_transition(const struct SavgGenerator *generator,
                                          double t,
                                          double *out,
                                          size_t out_len);

// `P(X_{t_1} = z_{i_1}, …, X_{t_r} = z_{i_r})` for the chain started from
// the law `initial` (length `size`).
//
// # Safety
// `times` and `indices` must hold `r` values; `value` must be writable.
enum SavgStatus savg_fdd_expectation(const struct SavgGenerator *generator,
                                     const double *initial,
                                     size_t initial_len,
                                     const double *times,
                                     const size_t *indices,
                                     size_t r,
                                     double *value);

// Simulates `n_paths` paths of the two-scale process at separation `gamma`
// from `x0`, recorded on `t_grid`.
//
// # Safety
// `x0` must hold `dim` doubles, `t_grid` `n_times`; handles must be live.
enum SavgStatus savg_simulate(const struct SavgModel *model,
                              const struct SavgSimplex *simplex,
                              const double *x0,
                              size_t dim,
                              double gamma,
                              double dt,
                              size_t n_paths,
                              uint64_t seed,
                              const double *t_grid,
                              size_t n_times,
                              struct SavgBatch **out);

// # Safety
// `batch` must be null or a live handle.
void savg_batch_free(struct SavgBatch *batch);

// # Safety
// `batch` must be null or a live handle.
size_t savg_batch_n_paths(const struct SavgBatch *batch);

// # Safety
// `batch` must be null or a live handle.
size_t savg_batch_n_times(const struct SavgBatch *batch);

// # Safety
// `batch` must be null or a live handle.
size_t savg_batch_dim(const struct SavgBatch *batch);

// State of `path` at grid index `time_index` into `out` (length `dim`).
//
// # Safety
// `out` must hold `out_len` doubles.
enum SavgStatus savg_batch_state(const struct SavgBatch *batch,
                                 size_t path,
                                 size_t time_index,
                                 double *out,
                                 size_t out_len);

// Writes the batch as CSV (`path,t,x1,...,xn`).
//
// # Safety
// `path` must be a nul-terminated string.
enum SavgStatus savg_batch_write_csv(const struct SavgBatch *batch, const char *path);

// Runs the suites of a scenario file and writes its CSV and JSON reports
// into `out_dir`. `suite` names one of `validate`, `run`, `ergodic`, `fdd`,
// `counterexample`; null runs every configured suite. `passed` receives 1
// when every check passed, else 0.
//
// # Safety
// Strings must be nul-terminated; `passed` must be writable.
enum SavgStatus savg_run_scenario(const char *config_path,
                                  const char *out_dir,
                                  const char *suite,
                                  int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAVG_H */
