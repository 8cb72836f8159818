#ifndef VOTERMIX_H
#define VOTERMIX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. `VM_STATUS_OK` is zero; everything else is an error.
typedef enum VmStatus {
  VM_STATUS_OK = 0,
  VM_STATUS_NULL_POINTER = 1,
  VM_STATUS_INVALID_ARGUMENT = 2,
  VM_STATUS_INVALID_SIZE = 3,
  VM_STATUS_PARSE = 4,
  VM_STATUS_INVALID_RATE = 5,
  VM_STATUS_REDUCIBLE = 6,
  VM_STATUS_CAPACITY = 7,
  VM_STATUS_OUT_OF_VALIDITY = 8,
  VM_STATUS_BUFFER_TOO_SMALL = 9,
  VM_STATUS_IO = 10,
  VM_STATUS_PANIC = 11,
  VM_STATUS_OTHER = 12,
} VmStatus;

// Opaque generator of the noisy voter model on `{0,1}^S`.
typedef struct VmExact VmExact;

// Opaque voting mechanism.
typedef struct VmKernel VmKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes) and returns the full message length.
// Pass a null `buf` to query the length.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t vm_last_error_message(char *buf, size_t len);

// Static description of a status code.
const char *vm_status_name(enum VmStatus status);

// Cycle `Z_n` with rate 1/2 to each neighbor.
//
// # Safety
// `out` must be valid for writes.
enum VmStatus vm_kernel_cycle(size_t n, struct VmKernel **out);

// Star with center 0 and leaves `1..=n`.
//
// # Safety
// `out` must be valid for writes.
enum VmStatus vm_kernel_star(size_t n, struct VmKernel **out);

// Complete graph on `n` sites.
//
// # Safety
// `out` must be valid for writes.
enum VmStatus vm_kernel_complete(size_t n, struct VmKernel **out);

// Kernel from parallel arrays of `(from, to, rate)` triples.
//
// # Safety
// `from`, `to` and `rate` must be valid for `len` reads; `out` for writes.
enum VmStatus vm_kernel_from_rates(size_t n_sites,
                                   const size_t *from,
                                   const size_t *to,
                                   const double *rate,
                                   size_t len,
                                   struct VmKernel **out);

// Kernel from the text format (`sites <n>`, then `rate <x> <y> <value>` lines).
//
// # Safety
// `text` must be a NUL-terminated string; `out` valid for writes.
enum VmStatus vm_kernel_parse(const char *text, struct VmKernel **out);

// Kernel read from a file in the text format.
//
// # Safety
// `path` must be a NUL-terminated string; `out` valid for writes.
enum VmStatus vm_kernel_from_file(const char *path, struct VmKernel **out);

// Releases a kernel. Null is a no-op.
//
// # Safety
// `kernel` must be null or a handle from this library not yet freed.
void vm_kernel_free(struct VmKernel *kernel);

// Number of sites; 0 for a null handle.
//
// # Safety
// `kernel` must be null or a live handle.
size_t vm_kernel_n_sites(const struct VmKernel *kernel);

// Largest exit rate.
//
// # Safety
// `kernel` must be a live handle; `out` valid for writes.
enum VmStatus vm_kernel_q_max(const struct VmKernel *kernel, double *out);

// Stationary law of the kernel into `pi` (length at least `n_sites`) and
// `pi_max / pi_min` into `rho` (either may be null).
//
// # Safety
// `kernel` must be a live handle; `pi` null or valid for `len` writes;
// `rho` null or valid for writes.
enum VmStatus vm_kernel_stationary(const struct VmKernel *kernel,
                                   double *pi,
                                   size_t len,
                                   double *rho);

// `t_mix(eps)` of the noisy voter model, computed exactly.
//
// # Safety
// `kernel` must be a live handle; `out` valid for writes.
enum VmStatus vm_t_mix_exact(const struct VmKernel *kernel, double eps, double *out);

// Builds the generator on `{0,1}^S` (at most 20 sites).
//
// # Safety
// `kernel` must be a live handle; `out` valid for writes.
enum VmStatus vm_exact_new(const struct VmKernel *kernel, struct VmExact **out);

// Releases a generator. Null is a no-op.
//
// # Safety
// `gen` must be null or a handle from this library not yet freed.
void vm_exact_free(struct VmExact *gen);

// `2^n`; 0 for a null handle.
//
// # Safety
// `gen` must be null or a live handle.
size_t vm_exact_n_states(const struct VmExact *gen);

// Time-`t` law started from the point mass at `start_index`.
//
// # Safety
// `gen` must be a live handle; `out` valid for `len` writes.
enum VmStatus vm_exact_evolve(const struct VmExact *gen,
                              size_t start_index,
                              double t,
                              double *out,
                              size_t len);

// Stationary law of the generator.
//
// # Safety
// `gen` must be a live handle; `out` valid for `len` writes.
enum VmStatus vm_exact_stationary(const struct VmExact *gen, double *out, size_t len);

// One draw of the time-`t` configuration from `start` (graphical
// construction, sampled lazily). Deterministic in `seed`.
//
// # Safety
// `kernel` must be a live handle; `start` and `out` valid for `n_sites`
// bytes.
enum VmStatus vm_sample_config(const struct VmKernel *kernel,
                               const uint8_t *start,
                               double t,
                               uint64_t seed,
                               uint8_t *out);

// One exact draw from the stationary law.
//
// # Safety
// `kernel` must be a live handle; `out` valid for `n_sites` bytes.
enum VmStatus vm_sample_stationary(const struct VmKernel *kernel, uint64_t seed, uint8_t *out);

// TV between all-ones and all-zeros started `q = 0` systems on `n` sites.
//
// # Safety
// `out` must be valid for writes.
enum VmStatus vm_hypercube_tv(size_t n, double t, double *out);

// `(4/sqrt(pi)) int_0^{e^{-alpha}/sqrt 8} e^{-x^2} dx`.
double vm_dgm_limit(double alpha);

// Lower bound formula with no validity checks.
double vm_wilson_formula(double q_max, double rho, double alpha);

// Lower bound on `d((1/2) ln n - alpha)`; `VM_STATUS_OUT_OF_VALIDITY`
// when `alpha < 1` or the time is below 1.
//
// # Safety
// `out` must be valid for writes.
enum VmStatus vm_wilson_lower_bound(size_t n_sites,
                                    double q_max,
                                    double rho,
                                    double alpha,
                                    double *out);

// Mixing weight of the two-leaf channel, for flip probabilities in (0, 1/2].
//
// # Safety
// `out` must be valid for writes.
enum VmStatus vm_upsilon_alpha(double theta, double theta1, double theta2, double *out);

// TV to stationarity from all-ones for the star with `n` leaves.
//
// # Safety
// `out` must be valid for writes.
enum VmStatus vm_star_tv_from_all_ones(size_t n, double t, double *out);

// Largest entrywise gap between the Ising generator on the `n`-cycle and
// the time-changed noisy voter generator.
//
// # Safety
// `out` must be valid for writes.
enum VmStatus vm_ising_discrepancy(size_t n, double beta, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOTERMIX_H */
