#ifndef STEPGRADE_H
#define STEPGRADE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_POINTER = 1,
  SG_STATUS_INVALID_UTF8 = 2,
  SG_STATUS_PARSE_ERROR = 3,
  SG_STATUS_INVALID_ARGUMENT = 4,
  SG_STATUS_NOT_FOUND = 5,
  SG_STATUS_UNDEFINED = 6,
  SG_STATUS_IO = 7,
  SG_STATUS_PANIC = 8,
} SgStatus;

/**
 * Constants map together with the unit table used to parse it.
 */
typedef struct SgConstants SgConstants;

typedef struct SgDataset SgDataset;

/**
 * Equivalence-check parameters. Obtain defaults from [`sg_params_default`].
 */
typedef struct {
  uint32_t n_max;
  uint32_t n_succ;
  uint32_t n_eq;
  double eps;
  double sample_lo;
  double sample_hi;
  uint64_t t_max_ms;
  uint64_t seed;
} SgParams;

/**
 * Message for the last failed call on this thread, or null after a
 * successful call. Valid until the next call on the same thread.
 */
const char *sg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sg_version(void);

/**
 * # Safety
 * `out` must be null or point to writable memory for an `SgParams`.
 */
SgStatus sg_params_default(SgParams *out);

/**
 * The bundled physical constants.
 *
 * # Safety
 * `out` must be null or point to writable memory for a pointer.
 */
SgStatus sg_constants_default(SgConstants **out);

/**
 * Constants from a JSON object mapping symbols to numbers or LaTeX
 * expressions. `"{}"` gives an empty map.
 *
 * # Safety
 * `json` must be null or a NUL-terminated string; `out` must be null or
 * writable.
 */
SgStatus sg_constants_from_json(const char *json, SgConstants **out);

/**
 * # Safety
 * `c` must be null or a handle from an `sg_constants_*` constructor that
 * has not been freed.
 */
void sg_constants_free(SgConstants *c);

/**
 * Decide whether two formulas are equivalent. A null `constants` means no
 * substitution; null `params` means defaults. Writes 1 or 0 to `out`.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; handles must be live.
 */
SgStatus sg_check_equivalence(const char *first,
                              const char *second,
                              const SgConstants *constants,
                              const SgParams *params,
                              int *out);

/**
 * Load a dataset from a JSON array, a JSON object, or JSON lines.
 *
 * # Safety
 * `path` must be null or NUL-terminated; `out` must be null or writable.
 */
SgStatus sg_dataset_load(const char *path, SgDataset **out);

/**
 * Number of problems, or 0 for a null handle.
 *
 * # Safety
 * `d` must be null or a live dataset handle.
 */
size_t sg_dataset_len(const SgDataset *d);

/**
 * # Safety
 * `d` must be null or a handle from [`sg_dataset_load`] that has not been
 * freed.
 */
void sg_dataset_free(SgDataset *d);

/**
 * Grade one candidate, given as a JSON object
 * `{problem_id, model?, solution, latency_s?}`. A null `constants` means
 * the bundled physical constants. On success `out_json` receives the score
 * report as JSON.
 *
 * # Safety
 * `dataset` must be live; `constants` null or live; `params` null or valid;
 * strings NUL-terminated; `out_json` writable.
 */
SgStatus sg_grade_solution_json(const SgDataset *dataset,
                                const char *candidate_json,
                                const SgConstants *constants,
                                const SgParams *params,
                                char **out_json);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void sg_string_free(char *s);

/**
 * Kendall tau-b of `n` paired scores, with the two-sided asymptotic
 * p-value. Returns `Undefined` when every x or every y is tied.
 *
 * # Safety
 * `x` and `y` must point to `n` readable doubles; outputs must be writable.
 */
SgStatus sg_kendall_tau_b(const double *x,
                          const double *y,
                          size_t n,
                          double *out_tau,
                          double *out_p);

#endif  /* STEPGRADE_H */
