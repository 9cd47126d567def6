#ifndef MPLHMC_H
#define MPLHMC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result code of every call.
typedef enum MplhmcStatus {
  MPLHMC_STATUS_OK = 0,
  MPLHMC_STATUS_NULL_POINTER = 1,
  MPLHMC_STATUS_INVALID_ARGUMENT = 2,
  MPLHMC_STATUS_DIMENSION_MISMATCH = 3,
  MPLHMC_STATUS_NON_FINITE = 4,
  MPLHMC_STATUS_UNKNOWN_TARGET = 5,
  MPLHMC_STATUS_DEGENERATE = 6,
  MPLHMC_STATUS_PANIC = 7,
  MPLHMC_STATUS_INTERNAL = 8,
} MplhmcStatus;

// Output of one sampling chain.
typedef struct MplhmcChain MplhmcChain;

// A target distribution.
typedef struct MplhmcTarget MplhmcTarget;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *mplhmc_last_error(void);

// Library version as a static NUL-terminated string.
const char *mplhmc_version(void);

// Creates a target by name (`isotropic10`, `anisotropic6`, `banana2`,
// `mixture3_sep3`, `mixture3_sep8`, `funnel10`, or `gaussian` with a
// precision diagonal).
//
// # Safety
// `name` must be a NUL-terminated string; `precision` must hold
// `precision_len` values when non-null; `out` must be writable.
enum MplhmcStatus mplhmc_target_new(const char *name,
                                    const double *precision,
                                    size_t precision_len,
                                    struct MplhmcTarget **out);

// Releases a target; null is ignored.
//
// # Safety
// `t` must come from [`mplhmc_target_new`] and not be used afterwards.
void mplhmc_target_free(struct MplhmcTarget *t);

// Dimension of the target, or 0 for null.
//
// # Safety
// `t` must be null or a live target.
size_t mplhmc_target_dim(const struct MplhmcTarget *t);

// `U(q)`.
//
// # Safety
// `q` must hold `dim` values and `out` must be writable.
enum MplhmcStatus mplhmc_target_potential(const struct MplhmcTarget *t,
                                          const double *q,
                                          size_t dim,
                                          double *out);

// `∇U(q)` written to `grad`.
//
// # Safety
// `q` and `grad` must each hold `dim` values.
enum MplhmcStatus mplhmc_target_gradient(const struct MplhmcTarget *t,
                                         const double *q,
                                         size_t dim,
                                         double *grad);

// One MPL step with identity mass, in place on `q` and `p`.
//
// # Safety
// `q` and `p` must each hold `dim` writable values.
enum MplhmcStatus mplhmc_mpl_step(const struct MplhmcTarget *t,
                                  double *q,
                                  double *p,
                                  size_t dim,
                                  double dt,
                                  double alpha2,
                                  double beta2);

// Runs one MPL-HMC chain with identity mass from `q0`.
//
// # Safety
// `q0` must hold `dim` values and `out` must be writable.
enum MplhmcStatus mplhmc_run_chain(const struct MplhmcTarget *t,
                                   double dt,
                                   size_t steps,
                                   double alpha2,
                                   double beta2,
                                   size_t n_samples,
                                   size_t burn_in,
                                   uint64_t seed,
                                   const double *q0,
                                   size_t dim,
                                   struct MplhmcChain **out);

// Releases a chain; null is ignored.
//
// # Safety
// `c` must come from [`mplhmc_run_chain`] and not be used afterwards.
void mplhmc_chain_free(struct MplhmcChain *c);

// Number of stored samples, or 0 for null.
//
// # Safety
// `c` must be null or a live chain.
size_t mplhmc_chain_n_samples(const struct MplhmcChain *c);

// Sample dimension, or 0 for null.
//
// # Safety
// `c` must be null or a live chain.
size_t mplhmc_chain_dim(const struct MplhmcChain *c);

// Acceptance rate over all iterations, or NaN for null.
//
// # Safety
// `c` must be null or a live chain.
double mplhmc_chain_acceptance_rate(const struct MplhmcChain *c);

// Gradient evaluations spent by the chain, or 0 for null.
//
// # Safety
// `c` must be null or a live chain.
size_t mplhmc_chain_grad_evals(const struct MplhmcChain *c);

// Copies the samples row-major (`n_samples × dim`) into `buf`.
//
// # Safety
// `buf` must hold `len` writable values.
enum MplhmcStatus mplhmc_chain_copy_samples(const struct MplhmcChain *c, double *buf, size_t len);

// Initial-monotone-sequence ESS of `n_chains` scalar series of length `n`.
//
// # Safety
// `data` must hold `n_chains * n` values and `out` must be writable.
enum MplhmcStatus mplhmc_ess(const double *data, size_t n_chains, size_t n, double *out);

// Gelman–Rubin R-hat of `n_chains` scalar series of length `n`.
//
// # Safety
// `data` must hold `n_chains * n` values and `out` must be writable.
enum MplhmcStatus mplhmc_rhat(const double *data, size_t n_chains, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MPLHMC_H */
