/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef FINTIME_H
#define FINTIME_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  FT_STATUS_OK = 0,
  FT_STATUS_NULL_POINTER = 1,
  FT_STATUS_INVALID_ARGUMENT = 2,
  FT_STATUS_INVALID_TIME_SET = 3,
  FT_STATUS_DIMENSION_MISMATCH = 4,
  FT_STATUS_ILL_CONDITIONED = 5,
  FT_STATUS_NOT_HYPERBOLIC = 6,
  FT_STATUS_NOT_ATTRACTIVE = 7,
  FT_STATUS_NUMERICAL = 8,
  FT_STATUS_BUFFER_TOO_SMALL = 9,
  FT_STATUS_CONFIG = 10,
  FT_STATUS_IO = 11,
  FT_STATUS_PANIC = 12,
} FtStatus;

/**
 * Linear process on a compact time set.
 */
typedef struct FtProcess FtProcess;

/**
 * Dichotomy spectrum with its extremal growth rates.
 */
typedef struct FtSpectrum FtSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ft_version(void);

/**
 * Message of the last failed call on this thread (empty if none). Valid
 * until the next failing call on the same thread.
 */
const char *ft_last_error(void);

/**
 * Process of `ẋ = A x` (`a`: row-major `n × n`) on the sampled interval
 * `[t0, t1]` with `samples` points.
 *
 * # Safety
 * `a` must point to `n*n` doubles and `out` to writable storage.
 */
FtStatus ft_process_constant_interval(size_t n,
                                      const double *a,
                                      double t0,
                                      double t1,
                                      size_t samples,
                                      FtProcess **out);

/**
 * Process of `ẋ = A x` on a finite time set of `count` points.
 *
 * # Safety
 * `a` must point to `n*n` doubles, `times` to `count` doubles, `out` to
 * writable storage.
 */
FtStatus ft_process_constant_points(size_t n,
                                    const double *a,
                                    const double *times,
                                    size_t count,
                                    FtProcess **out);

/**
 * # Safety
 * `p` must be null or a handle from this library not yet freed.
 */
void ft_process_free(FtProcess *p);

/**
 * State dimension, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t ft_process_dim(const FtProcess *p);

/**
 * The exponentially shifted process `e^{−γ(t−s)} Φ(t, s)`.
 *
 * # Safety
 * `p` must be a live handle, `out` writable.
 */
FtStatus ft_process_shift(const FtProcess *p, double gamma, FtProcess **out);

/**
 * `−ugr(Rⁿ)` in the Euclidean norm; fails with `NotAttractive` otherwise.
 *
 * # Safety
 * `p` must be a live handle, `out` writable.
 */
FtStatus ft_stability_radius(const FtProcess *p, size_t resolution, double *out);

/**
 * Spectrum in the Euclidean norm. `seed` drives the subspace search in
 * dimension ≥ 4.
 *
 * # Safety
 * `p` must be a live handle, `out` writable.
 */
FtStatus ft_spectrum_compute(const FtProcess *p,
                             size_t resolution,
                             uint64_t seed,
                             FtSpectrum **out);

/**
 * # Safety
 * `s` must be null or a handle from this library not yet freed.
 */
void ft_spectrum_free(FtSpectrum *s);

/**
 * Number of spectral intervals, 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live handle.
 */
size_t ft_spectrum_interval_count(const FtSpectrum *s);

/**
 * Writes intervals as `[lo0, hi0, lo1, hi1, …]` into `out` (capacity
 * `capacity` doubles).
 *
 * # Safety
 * `s` must be a live handle, `out` must hold `capacity` doubles.
 */
FtStatus ft_spectrum_intervals(const FtSpectrum *s, double *out, size_t capacity);

/**
 * Hyperbolicity verdict, EMD rank (−1 if not hyperbolic), `dist(0, Σ)` and
 * whether the subspace search was exhaustive. Any output pointer may be null.
 *
 * # Safety
 * `s` must be a live handle; non-null outputs must be writable.
 */
FtStatus ft_spectrum_summary(const FtSpectrum *s,
                             bool *hyperbolic,
                             int64_t *emd_k,
                             double *radius,
                             bool *certified);

/**
 * Writes `elgr_k` and `eugr_k` for `k = 0..=n` (`n + 1` doubles each;
 * `elgr_0 = +∞`, `eugr_0 = −∞`). Either output may be null.
 *
 * # Safety
 * `s` must be a live handle; non-null outputs must hold `capacity` doubles.
 */
FtStatus ft_spectrum_extremal(const FtSpectrum *s, double *elgr, double *eugr, size_t capacity);

/**
 * Finite-time Lyapunov exponents `(1/T) ln σ_i` of a row-major `n × n`
 * matrix, largest first, written to `out` (`n` doubles).
 *
 * # Safety
 * `m` must point to `n*n` doubles and `out` to `n` writable doubles.
 */
FtStatus ft_two_point_exponents(size_t n, const double *m, double t, double *out);

/**
 * Parses and runs a scenario document. `out_dir` (nullable) overrides the
 * scenario's output directory. `exit_code` receives the CLI exit code.
 *
 * # Safety
 * `config` must be a NUL-terminated UTF-8 string; `out_dir` null or
 * NUL-terminated; `exit_code` null or writable.
 */
FtStatus ft_run_scenario(const char *config, const char *out_dir, int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FINTIME_H */
