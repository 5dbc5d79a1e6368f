#ifndef SOS_ALMOST_H
#define SOS_ALMOST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SosStatus {
  SOS_STATUS_OK = 0,
  SOS_STATUS_NULL_POINTER = 1,
  SOS_STATUS_INVALID_UTF8 = 2,
  SOS_STATUS_PARSE = 3,
  SOS_STATUS_INVALID_ARGUMENT = 4,
  SOS_STATUS_NEGATIVE_INPUT = 5,
  SOS_STATUS_SCHEDULE_EXHAUSTED = 6,
  SOS_STATUS_SOLVER = 7,
  SOS_STATUS_MALFORMED = 8,
  SOS_STATUS_NOT_CONVEX = 9,
  SOS_STATUS_BUFFER_TOO_SMALL = 10,
  SOS_STATUS_PANIC = 11,
} SosStatus;

/*
 A certificate together with the polynomial it certifies.
 */
typedef struct SosCertificate SosCertificate;

/*
 A parsed polynomial.
 */
typedef struct SosPolynomial SosPolynomial;

/*
 One relaxation solve.
 */
typedef struct SosBound {
  /*
   1 when the solver reached the requested tolerance.
   */
  int32_t optimal;
  double primal_value;
  double dual_value;
  double gap;
  double lambda;
  double gamma;
  uint32_t iterations;
} SosBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *sos_version(void);

/*
 Copies the last error message of this thread into `buf`.

 # Safety
 `buf` must be valid for `cap` bytes; `needed` may be null.
 */
enum SosStatus sos_last_error_message(char *buf, size_t cap, size_t *needed);

/*
 Parses `text` as a polynomial in `n` variables `x1..xn`.

 # Safety
 `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SosStatus sos_polynomial_parse(const char *text, size_t n, struct SosPolynomial **out);

/*
 # Safety
 `p` must come from [`sos_polynomial_parse`] or be null.
 */
void sos_polynomial_free(struct SosPolynomial *p);

/*
 # Safety
 `p` must be a live handle and `out` valid.
 */
enum SosStatus sos_polynomial_degree(const struct SosPolynomial *p, uint32_t *out);

/*
 Evaluates at `x` (length `n`).

 # Safety
 `x` must be valid for `n` reads and `out` valid.
 */
enum SosStatus sos_polynomial_evaluate(const struct SosPolynomial *p,
                                       const double *x,
                                       size_t n,
                                       double *out);

/*
 Writes the canonical text form of `p`.

 # Safety
 `buf` must be valid for `cap` bytes; `needed` may be null.
 */
enum SosStatus sos_polynomial_to_string(const struct SosPolynomial *p,
                                        char *buf,
                                        size_t cap,
                                        size_t *needed);

/*
 Solves the order-`r` relaxation on the box of radius `radius`.

 # Safety
 `p` must be a live handle and `out` valid.
 */
enum SosStatus sos_minimize(const struct SosPolynomial *p,
                            uint32_t r,
                            double radius,
                            double tol,
                            struct SosBound *out);

/*
 Searches the schedule `radii × orders` (radius-major) for a certificate
 that `f + eps Θ_r` is a sum of squares.

 # Safety
 Arrays must be valid for the given lengths and `out` valid.
 */
enum SosStatus sos_find_certificate(const struct SosPolynomial *p,
                                    double eps,
                                    const double *radii,
                                    size_t n_radii,
                                    const uint32_t *orders,
                                    size_t n_orders,
                                    double tol,
                                    struct SosCertificate **out);

/*
 # Safety
 `c` must come from this library or be null.
 */
void sos_certificate_free(struct SosCertificate *c);

/*
 Reads `r_eps`, `epsilon`, the identity residual and the ℓ1 gap. Any
 output pointer may be null.

 # Safety
 `c` must be a live handle.
 */
enum SosStatus sos_certificate_info(const struct SosCertificate *c,
                                    uint32_t *r_eps,
                                    double *epsilon,
                                    double *residual,
                                    double *l1_gap);

/*
 Independently rechecks the certificate. `passed` is set to 0 or 1.

 # Safety
 `c` must be a live handle; `residual` may be null.
 */
enum SosStatus sos_certificate_verify(const struct SosCertificate *c,
                                      int32_t *passed,
                                      double *residual);

/*
 Serializes the certificate as a JSON document.

 # Safety
 `buf` must be valid for `cap` bytes; `needed` may be null.
 */
enum SosStatus sos_certificate_to_json(const struct SosCertificate *c,
                                       char *buf,
                                       size_t cap,
                                       size_t *needed);

/*
 Loads a certificate document.

 # Safety
 `json` must be NUL-terminated and `out` valid.
 */
enum SosStatus sos_certificate_from_json(const char *json, struct SosCertificate **out);

/*
 Minimizes convex `f` on `{g_j >= 0}` from the Slater point `x0`.
 Writes `m` multipliers to `lambda`, `n` coordinates to `x_star` and the
 optimal value to `f_star`.

 # Safety
 `g` must hold `m` live handles, `x0` and `x_star` `n` doubles, `lambda`
 `m` doubles.
 */
enum SosStatus sos_kkt_solve(const struct SosPolynomial *f,
                             const struct SosPolynomial *const *g,
                             size_t m,
                             const double *x0,
                             size_t n,
                             double tol,
                             double *lambda,
                             double *x_star,
                             double *f_star);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOS_ALMOST_H */
