#ifndef HIERBAYES_H
#define HIERBAYES_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HbStatus {
  HB_STATUS_OK = 0,
  HB_STATUS_NULL_POINTER = 1,
  HB_STATUS_INVALID_ARGUMENT = 2,
  HB_STATUS_DOMAIN = 3,
  HB_STATUS_BUFFER_TOO_SMALL = 4,
  HB_STATUS_IO = 5,
  HB_STATUS_PANIC = 6,
} HbStatus;

typedef enum HbKernel {
  HB_KERNEL_PCN = 0,
  HB_KERNEL_RADIAL_PCN = 1,
} HbKernel;

typedef struct HbChain HbChain;

typedef struct HbHypermodel HbHypermodel;

/*
 Final IAS result of a (possibly two-phase) MAP run.
 */
typedef struct HbMapResult HbMapResult;

/*
 Whitened deconvolution problem with its ground truth.
 */
typedef struct HbProblem HbProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copy the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length without the NUL.

 # Safety
 `buf` must be null or valid for `len` bytes.
 */
uintptr_t hb_last_error_message(char *buf, uintptr_t len);

/*
 Build the deconvolution benchmark. `config_json` may be null for the
 default configuration.

 # Safety
 `config_json` must be null or a NUL-terminated string; `out` must be valid.
 */
enum HbStatus hb_problem_new(const char *config_json, struct HbProblem **out);

/*
 # Safety
 `p` must be null or a pointer returned by `hb_problem_new`.
 */
void hb_problem_free(struct HbProblem *p);

/*
 # Safety
 Pointers must be valid.
 */
enum HbStatus hb_problem_dims(const struct HbProblem *p, uintptr_t *m, uintptr_t *n);

/*
 Whitened data b̂ (length m).

 # Safety
 `buf` must be valid for `len` values; `needed` may be null.
 */
enum HbStatus hb_problem_copy_b_hat(const struct HbProblem *p,
                                    double *buf,
                                    uintptr_t len,
                                    uintptr_t *needed);

/*
 Ground-truth signal z on the coarse grid (length n).

 # Safety
 `buf` must be valid for `len` values; `needed` may be null.
 */
enum HbStatus hb_problem_copy_truth(const struct HbProblem *p,
                                    double *buf,
                                    uintptr_t len,
                                    uintptr_t *needed);

/*
 # Safety
 `out` must be valid.
 */
enum HbStatus hb_hypermodel_new(double r, double beta, double vartheta, struct HbHypermodel **out);

/*
 Hypermodel with exponent `r_target` matched to the gamma model
 `(1, beta1, vartheta1)`.

 # Safety
 `out` must be valid.
 */
enum HbStatus hb_hypermodel_match(double r_target,
                                  double beta1,
                                  double vartheta1,
                                  struct HbHypermodel **out);

/*
 # Safety
 `h` must be null or a pointer from `hb_hypermodel_new`/`hb_hypermodel_match`.
 */
void hb_hypermodel_free(struct HbHypermodel *h);

/*
 # Safety
 All pointers must be valid.
 */
enum HbStatus hb_hypermodel_params(const struct HbHypermodel *h,
                                   double *r,
                                   double *beta,
                                   double *vartheta);

/*
 Componentwise λ-update for `xi[..n]`, written to `out[..n]`.

 # Safety
 `xi` and `out` must be valid for `n` values.
 */
enum HbStatus hb_lambda_update(const struct HbHypermodel *h,
                               const double *xi,
                               uintptr_t n,
                               double *out);

/*
 Hybrid IAS MAP estimate. `phase1` must have r = 1; `phase2` may be null.
 Reaching `max_iter` is not an error; query [`hb_map_converged`].

 # Safety
 Pointers must be valid (`phase2` may be null).
 */
enum HbStatus hb_map_run(const struct HbProblem *p,
                         const struct HbHypermodel *phase1,
                         const struct HbHypermodel *phase2,
                         double tol,
                         uintptr_t max_iter,
                         struct HbMapResult **out);

/*
 # Safety
 `m` must be null or a pointer from `hb_map_run`.
 */
void hb_map_free(struct HbMapResult *m);

/*
 1 if every phase met the stopping criterion, 0 otherwise (or on null).

 # Safety
 `m` must be null or valid.
 */
int32_t hb_map_converged(const struct HbMapResult *m);

/*
 Iterations of the final phase; 0 on null.

 # Safety
 `m` must be null or valid.
 */
uintptr_t hb_map_iterations(const struct HbMapResult *m);

/*
 MAP increments x (length n).

 # Safety
 `buf` must be valid for `len` values; `needed` may be null.
 */
enum HbStatus hb_map_copy_x(const struct HbMapResult *m,
                            double *buf,
                            uintptr_t len,
                            uintptr_t *needed);

/*
 MAP variances θ (length n).

 # Safety
 `buf` must be valid for `len` values; `needed` may be null.
 */
enum HbStatus hb_map_copy_theta(const struct HbMapResult *m,
                                double *buf,
                                uintptr_t len,
                                uintptr_t *needed);

/*
 Run a chain for `hm` started at the MAP point `map`. `k` is ignored for
 plain pCN.

 # Safety
 Pointers must be valid.
 */
enum HbStatus hb_chain_run(const struct HbProblem *p,
                           const struct HbHypermodel *hm,
                           const struct HbMapResult *map,
                           enum HbKernel kernel,
                           double h,
                           double k,
                           uint64_t total_steps,
                           uint64_t thin,
                           uint64_t seed,
                           struct HbChain **out);

/*
 # Safety
 `c` must be null or a pointer from `hb_chain_run`.
 */
void hb_chain_free(struct HbChain *c);

/*
 Fraction of accepted proposals; NaN on null.

 # Safety
 `c` must be null or valid.
 */
double hb_chain_acceptance_rate(const struct HbChain *c);

/*
 Number of stored draws; 0 on null.

 # Safety
 `c` must be null or valid.
 */
uintptr_t hb_chain_stored(const struct HbChain *c);

/*
 Stored draws, row-major, each row `(v_1..v_n, τ_1..τ_n)`.

 # Safety
 `buf` must be valid for `len` values; `needed` may be null.
 */
enum HbStatus hb_chain_copy_draws(const struct HbChain *c,
                                  double *buf,
                                  uintptr_t len,
                                  uintptr_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HIERBAYES_H */
