#ifndef STABLE_CLT_H
#define STABLE_CLT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Status codes; the nonzero library codes match the CLI exit codes.
typedef enum ScltStatus {
  SCLT_STATUS_OK = 0,
  SCLT_STATUS_IO = 1,
  SCLT_STATUS_INVALID_INPUT = 2,
  SCLT_STATUS_NUMERICAL = 3,
  SCLT_STATUS_HYPOTHESIS = 4,
  SCLT_STATUS_NULL_POINTER = 5,
  SCLT_STATUS_PANIC = 6,
} ScltStatus;

// Which operator form [`sclt_generator_apply`] evaluates.
typedef enum ScltForm {
  SCLT_FORM_RAW = 0,
  SCLT_FORM_SHIFTED = 1,
} ScltForm;

// Constant convention for bound reports.
typedef enum ScltBoundMode {
  SCLT_BOUND_MODE_UNIT = 0,
  SCLT_BOUND_MODE_EXPLICIT = 1,
} ScltBoundMode;

// Tabulated stable distribution function for fast Kolmogorov distances.
typedef struct ScltCdfTable ScltCdfTable;

// A test function with its derivatives.
typedef struct ScltFunction ScltFunction;

// A law attracted to a stable law.
typedef struct ScltLaw ScltLaw;

// Stable law parameters.
typedef struct ScltStable ScltStable;

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `cap` bytes) and returns the full message length.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t sclt_last_error(char *buf, size_t cap);

// # Safety
// `out_handle` must be a valid pointer to a handle slot.
enum ScltStatus sclt_stable_new(double alpha,
                                double beta,
                                double sigma,
                                struct ScltStable **out_handle);

// # Safety
// `handle` must be null or come from [`sclt_stable_new`] or [`sclt_law_limit`].
void sclt_stable_free(struct ScltStable *handle);

// Density of the stable process at time `t`.
//
// # Safety
// Pointers must be valid.
enum ScltStatus sclt_stable_pdf(const struct ScltStable *handle,
                                double t,
                                double x,
                                double *out_value);

// # Safety
// Pointers must be valid.
enum ScltStatus sclt_stable_cdf(const struct ScltStable *handle, double x, double *out_value);

// Fills `values[0..count]` with stable draws from the stream `seed`.
//
// # Safety
// `values` must point to `count` writable doubles.
enum ScltStatus sclt_stable_sample(const struct ScltStable *handle,
                                   size_t count,
                                   uint64_t seed,
                                   double *values);

// Builds a law from its JSON description, e.g. `{"family":"pareto","alpha":1.5}`.
//
// # Safety
// `json` must be a NUL-terminated string; `out_handle` a valid slot.
enum ScltStatus sclt_law_from_json(const char *json, struct ScltLaw **out_handle);

// # Safety
// `handle` must be null or come from [`sclt_law_from_json`].
void sclt_law_free(struct ScltLaw *handle);

// The stable limit of the normalized sums; free with [`sclt_stable_free`].
//
// # Safety
// Pointers must be valid.
enum ScltStatus sclt_law_limit(const struct ScltLaw *handle, struct ScltStable **out_handle);

// Fills `values[0..count]` with realizations of the normalized sum of `n`
// draws.
//
// # Safety
// `values` must point to `count` writable doubles.
enum ScltStatus sclt_law_sample_sum(const struct ScltLaw *handle,
                                    size_t n,
                                    size_t count,
                                    uint64_t seed,
                                    double *values);

// Builds a test function from JSON, e.g. `{"kind":"step","center":0,"rho":2}`.
//
// # Safety
// `json` must be a NUL-terminated string; `out_handle` a valid slot.
enum ScltStatus sclt_function_from_json(const char *json, struct ScltFunction **out_handle);

// # Safety
// `handle` must be null or come from [`sclt_function_from_json`].
void sclt_function_free(struct ScltFunction *handle);

// Derivative of order `order` (0 to 3) at `x`.
//
// # Safety
// Pointers must be valid.
enum ScltStatus sclt_function_eval(const struct ScltFunction *handle,
                                   uint32_t order,
                                   double x,
                                   double *out_value);

// The stable generator applied to a test function at `x`.
//
// # Safety
// Pointers must be valid.
enum ScltStatus sclt_generator_apply(const struct ScltStable *stable,
                                     const struct ScltFunction *function,
                                     double x,
                                     enum ScltForm form,
                                     double *out_value);

// Total of the main (or, with `improved`, the improved) bound at `n`.
// `function` supplies derivative norms and may be null in unit mode.
//
// # Safety
// `law` and `out_total` must be valid; `function` may be null.
enum ScltStatus sclt_bound_total(const struct ScltLaw *law,
                                 const struct ScltFunction *function,
                                 size_t n,
                                 enum ScltBoundMode mode,
                                 bool improved,
                                 double *out_total);

// Builds the distribution-function table of a stable law.
//
// # Safety
// Pointers must be valid.
enum ScltStatus sclt_cdf_table_new(const struct ScltStable *stable,
                                   struct ScltCdfTable **out_handle);

// # Safety
// `handle` must be null or come from [`sclt_cdf_table_new`].
void sclt_cdf_table_free(struct ScltCdfTable *handle);

// Kolmogorov distance between the empirical law of `values` and the
// tabulated stable law.
//
// # Safety
// `values` must point to `len` readable doubles.
enum ScltStatus sclt_kolmogorov_distance(const struct ScltCdfTable *table,
                                         const double *values,
                                         size_t len,
                                         double *out_value);

// The normalizing level of the log-tail family.
//
// # Safety
// `out_value` must be valid.
enum ScltStatus sclt_gamma_n(double alpha, double delta, double k0, size_t n, double *out_value);

#endif  /* STABLE_CLT_H */
