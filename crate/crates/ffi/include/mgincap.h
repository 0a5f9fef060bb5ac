#ifndef MGINCAP_H
#define MGINCAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MgStatus {
  MG_STATUS_OK = 0,
  MG_STATUS_NULL_POINTER = 1,
  MG_STATUS_INVALID_PARAMETER = 2,
  MG_STATUS_DIVERGENT_MOMENT = 3,
  MG_STATUS_DEGENERATE_MODEL = 4,
  MG_STATUS_RESOLUTION = 5,
  MG_STATUS_NO_CONVERGENCE = 6,
  MG_STATUS_DOMAIN = 7,
  MG_STATUS_INTERNAL = 8,
} MgStatus;

/**
 * Opaque noise model handle.
 */
typedef struct MgNoise MgNoise;

typedef struct MgBounds {
  double p0;
  double l2;
  double u;
  double c_asymptotic;
  double h_noise;
} MgBounds;

typedef struct MgBaResult {
  double p0;
  double capacity;
  double lambda;
  double gap;
  double kkt_residual;
  uint64_t iterations;
} MgBaResult;

typedef struct MgPamBounds {
  /**
   * Adjacent-point spacing.
   */
  double a;
  double pe;
  double lhat1;
  double lhat2;
  double mi_numeric;
} MgPamBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len - 1` bytes). Returns the full message
 * length in bytes, excluding the terminator.
 */
size_t mg_last_error(char *buf, size_t len);

/**
 * Creates a noise model. `*out` receives a handle owned by the caller.
 */
enum MgStatus mg_noise_new(double alpha,
                           double gamma_s,
                           double gamma_g,
                           double c1,
                           double gamma_sg,
                           struct MgNoise **out);

/**
 * Releases a handle from `mg_noise_new`. Null is ignored.
 */
void mg_noise_free(struct MgNoise *h);

enum MgStatus mg_noise_pdf(const struct MgNoise *h, double n, double *out);

/**
 * `P(|N| <= x)`.
 */
enum MgStatus mg_noise_central_mass(const struct MgNoise *h, double x, double *out);

/**
 * `E|N|^p`.
 */
enum MgStatus mg_noise_p_moment(const struct MgNoise *h, double p, double *out);

/**
 * Differential entropy: quadrature when `closed` is 0, otherwise the
 * closed form.
 */
enum MgStatus mg_noise_entropy(const struct MgNoise *h, int32_t closed, double *out);

/**
 * Closed-form bounds at `P0 = 10^(gsnr_db/10) E|N|^p`.
 */
enum MgStatus mg_bounds(const struct MgNoise *h, double p, double gsnr_db, struct MgBounds *out);

/**
 * Blahut-Arimoto capacity under `E|X|^p <= P0`. `tol <= 0` keeps the
 * default stopping tolerance.
 */
enum MgStatus mg_ba_capacity(const struct MgNoise *h,
                             double p,
                             double gsnr_db,
                             double tol,
                             struct MgBaResult *out);

/**
 * M-PAM bounds with the sum power normalization and Gauss-Hermite order
 * `ghq_order` (30 when 0).
 */
enum MgStatus mg_pam_bounds(const struct MgNoise *h,
                            uint32_t m,
                            double p,
                            double gsnr_db,
                            uint32_t ghq_order,
                            struct MgPamBounds *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MGINCAP_H */
