#ifndef NLSNF_H
#define NLSNF_H

/* Generated by cbindgen from crates/nlsnf-ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum NlsnfStatus {
  NLSNF_STATUS_OK = 0,
  NLSNF_STATUS_NULL_POINTER = 1,
  NLSNF_STATUS_INVALID_ARGUMENT = 2,
  // smallness or domain condition of a normal form violated
  NLSNF_STATUS_SMALLNESS = 3,
  NLSNF_STATUS_NUMERIC = 4,
  NLSNF_STATUS_BUFFER_TOO_SMALL = 5,
  NLSNF_STATUS_PANIC = 6,
} NlsnfStatus;

// Opaque resonant normal form H0 + Z.
typedef struct NlsnfNormalForm NlsnfNormalForm;

// Opaque split-step propagator.
typedef struct NlsnfPropagator NlsnfPropagator;

// Kernel selector: `kind` 0 is the power law |k|^-p, 1 is exp(-|k|^beta).
typedef struct NlsnfKernel {
  int kind;
  uint32_t p;
  double beta;
} NlsnfKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated).
// `*needed` receives the full length including the terminator.
//
// # Safety
// `buf` must point to `cap` writable bytes or be null with `cap == 0`.
enum NlsnfStatus nlsnf_last_error(char *buf, size_t cap, size_t *needed);

// Lower real branch of the Lambert W function, y in [-1/e, 0).
//
// # Safety
// `out` must be a valid pointer.
enum NlsnfStatus nlsnf_lambert_w_m1(double y, double *out);

// Creates a propagator for modes |j| <= `modes`.
//
// # Safety
// `k` and `out` must be valid pointers.
enum NlsnfStatus nlsnf_propagator_new(const struct NlsnfKernel *k,
                                      size_t modes,
                                      struct NlsnfPropagator **out);

// # Safety
// `p` must come from `nlsnf_propagator_new` and not be used afterwards.
void nlsnf_propagator_free(struct NlsnfPropagator *p);

// Advances the state in place by `steps` steps of size `dt`.
// `strang` selects Strang splitting (nonzero) or Lie splitting (zero).
//
// # Safety
// `p` must be a live handle; `re` and `im` must each hold `len` doubles.
enum NlsnfStatus nlsnf_propagator_step(struct NlsnfPropagator *p,
                                       double *re,
                                       double *im,
                                       size_t len,
                                       double dt,
                                       uint64_t steps,
                                       int strang);

// Energy of the truncated Hamiltonian at the given state.
//
// # Safety
// `p` must be a live handle; `re`, `im` hold `len` doubles; `out` is valid.
enum NlsnfStatus nlsnf_propagator_hamiltonian(struct NlsnfPropagator *p,
                                              const double *re,
                                              const double *im,
                                              size_t len,
                                              double *out);

// Resonant Birkhoff normal form of the truncated Hamiltonian up to degree 2d,
// with the Gevrey weight of exponent `gevrey_g` and constant `gevrey_c_f`.
//
// # Safety
// `k` and `out` must be valid pointers.
enum NlsnfStatus nlsnf_normal_form_new(const struct NlsnfKernel *k,
                                       size_t modes,
                                       size_t degree,
                                       double s,
                                       double s0,
                                       double r,
                                       double gevrey_g,
                                       double gevrey_c_f,
                                       struct NlsnfNormalForm **out);

// # Safety
// `nf` must come from `nlsnf_normal_form_new` and not be used afterwards.
void nlsnf_normal_form_free(struct NlsnfNormalForm *nf);

// Number of monomials of H0 + Z.
//
// # Safety
// `nf` must be a live handle and `out` valid.
enum NlsnfStatus nlsnf_normal_form_terms(const struct NlsnfNormalForm *nf, size_t *out);

// Evaluates H0 + Z at a state of 2M+1 modes; the value is real for real
// Hamiltonians, the imaginary part is returned for diagnostics.
//
// # Safety
// `nf` must be a live handle; `re`, `im` hold `len` doubles; outputs valid.
enum NlsnfStatus nlsnf_normal_form_eval(const struct NlsnfNormalForm *nf,
                                        size_t modes,
                                        const double *re,
                                        const double *im,
                                        size_t len,
                                        double *out_re,
                                        double *out_im);

// Text dump of H0 + Z, one monomial per line. With a too small buffer the
// call returns `NLSNF_STATUS_BUFFER_TOO_SMALL` and sets `*needed`.
//
// # Safety
// `nf` must be a live handle; `buf` holds `cap` bytes or is null with cap 0.
enum NlsnfStatus nlsnf_normal_form_dump(const struct NlsnfNormalForm *nf,
                                        char *buf,
                                        size_t cap,
                                        size_t *needed);

// Monte Carlo fraction of the unit ball (s = 0.5, Gevrey weight g = 0.5, c_f = 0.9) where
// some frequency of length 2d falls below 3 gamma.
//
// # Safety
// `k` and `out` must be valid pointers.
enum NlsnfStatus nlsnf_resonant_fraction(const struct NlsnfKernel *k,
                                         size_t modes,
                                         size_t d,
                                         double gamma,
                                         size_t samples,
                                         uint64_t seed,
                                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLSNF_H */
