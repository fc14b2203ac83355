#ifndef PTSPEC_H
#define PTSPEC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum PtsStatus {
  PTS_STATUS_OK = 0,
  PTS_STATUS_NULL_POINTER = 1,
  PTS_STATUS_CONFIG = 2,
  PTS_STATUS_NUMERIC = 3,
  PTS_STATUS_IO = 4,
  PTS_STATUS_VALIDATION = 5,
  PTS_STATUS_PANIC = 6,
} PtsStatus;

/**
 * A built or loaded process tensor.
 */
typedef struct PtsProcessTensor PtsProcessTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t pts_last_error_message(char *buf, uintptr_t len);

/**
 * Builds a process tensor for the Ohmic bath.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum PtsStatus pts_pt_build(double alpha,
                            double omega_c,
                            double temperature,
                            double dt,
                            uintptr_t n_steps,
                            uintptr_t dkmax,
                            double eps_rel,
                            struct PtsProcessTensor **out);

/**
 * Loads a process tensor file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid handle slot.
 */
enum PtsStatus pts_pt_load(const char *path, struct PtsProcessTensor **out);

/**
 * Writes a process tensor file.
 *
 * # Safety
 * `pt` must be a live handle and `path` a NUL-terminated string.
 */
enum PtsStatus pts_pt_save(const struct PtsProcessTensor *pt, const char *path);

/**
 * Number of time steps held by the process tensor, 0 for a null handle.
 *
 * # Safety
 * `pt` must be null or a live handle.
 */
uintptr_t pts_pt_n_steps(const struct PtsProcessTensor *pt);

/**
 * Largest bond dimension, 0 for a null handle.
 *
 * # Safety
 * `pt` must be null or a live handle.
 */
uintptr_t pts_pt_max_bond(const struct PtsProcessTensor *pt);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `pt` must be null or a handle not yet freed.
 */
void pts_pt_free(struct PtsProcessTensor *pt);

/**
 * Linear response `Tr[V(t)V(0)ρ₀]` at `t = kδt`, `k = 0..len`, for the
 * system `(ε + λ)` on both sites with coupling `omega_el`.
 *
 * # Safety
 * `out_re` and `out_im` must each point to `len` writable doubles.
 */
enum PtsStatus pts_linear_response(const struct PtsProcessTensor *pt,
                                   double epsilon,
                                   double omega_el,
                                   double reorg,
                                   double *out_re,
                                   double *out_im,
                                   uintptr_t len);

/**
 * Runs a JSON configuration like the command line tool. `pt_cache` and
 * `output_dir` may be null.
 *
 * # Safety
 * Non-null arguments must be NUL-terminated strings.
 */
enum PtsStatus pts_run_config(const char *config_path,
                              const char *pt_cache,
                              const char *output_dir);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pts_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PTSPEC_H */
