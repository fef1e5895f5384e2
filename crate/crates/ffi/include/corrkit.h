#ifndef CORRKIT_H
#define CORRKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CkKind {
  CK_KIND_PEARSON = 0,
  CK_KIND_SPEARMAN = 1,
  CK_KIND_KENDALL = 2,
} CkKind;

typedef enum CkStatus {
  CK_STATUS_OK = 0,
  CK_STATUS_NULL_POINTER = 1,
  CK_STATUS_INVALID_INPUT = 2,
  CK_STATUS_DEGENERATE = 3,
  CK_STATUS_DOMAIN = 4,
  CK_STATUS_NUMERIC = 5,
  CK_STATUS_INFEASIBLE = 6,
  CK_STATUS_UNSUPPORTED = 7,
  CK_STATUS_DATA = 8,
  CK_STATUS_PANIC = 9,
} CkStatus;

/**
 * A numeric table held as a finite population.
 */
typedef struct CkDataset CkDataset;

/**
 * Exact density of Pearson's r for a bivariate normal population.
 */
typedef struct CkDensity CkDensity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *ck_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ck_version(void);

/**
 * # Safety
 * `x` and `y` must point to `n` doubles; `out` must be writable.
 */
enum CkStatus ck_pearson(const double *x, const double *y, size_t n, double *out);

/**
 * # Safety
 * As [`ck_pearson`].
 */
enum CkStatus ck_spearman(const double *x, const double *y, size_t n, double *out);

/**
 * Kendall's tau-b.
 *
 * # Safety
 * As [`ck_pearson`].
 */
enum CkStatus ck_kendall(const double *x, const double *y, size_t n, double *out);

/**
 * Expected sample r_p for a bivariate normal population.
 *
 * # Safety
 * `out` must be writable.
 */
enum CkStatus ck_expected_rp(double rho, size_t n, double *out);

/**
 * Expected sample r_s for a bivariate normal population.
 *
 * # Safety
 * `out` must be writable.
 */
enum CkStatus ck_expected_rs(double rho, size_t n, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum CkStatus ck_rs_from_rp(double rp, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum CkStatus ck_rt_from_rp(double rp, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum CkStatus ck_rp_from_rs(double rs, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum CkStatus ck_fisher_z(double r, double *out);

/**
 * Fisher-z confidence interval for r_p at `level` (e.g. 0.95).
 *
 * # Safety
 * `lower` and `upper` must be writable.
 */
enum CkStatus ck_fisher_ci(double r, size_t n, double level, double *lower, double *upper);

/**
 * # Safety
 * `out` must be writable; on success `*out` owns a handle for [`ck_density_free`].
 */
enum CkStatus ck_density_new(double rho, size_t n, struct CkDensity **out);

/**
 * # Safety
 * `d` must come from [`ck_density_new`]; `out` must be writable.
 */
enum CkStatus ck_density_pdf(const struct CkDensity *d, double r, double *out);

/**
 * Probability that r_p falls in [lo, hi].
 *
 * # Safety
 * As [`ck_density_pdf`].
 */
enum CkStatus ck_density_probability(const struct CkDensity *d, double lo, double hi, double *out);

/**
 * # Safety
 * `d` must come from [`ck_density_new`] and not be used afterwards. NULL is ignored.
 */
void ck_density_free(struct CkDensity *d);

/**
 * Loads a comma-separated file with a header row. Rows with missing or
 * non-numeric cells are dropped; their count goes to `dropped` if non-NULL.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CkStatus ck_dataset_from_csv(const char *path, struct CkDataset **out, size_t *dropped);

/**
 * Builds a dataset from column-major values (`n_cols` runs of `n_rows`).
 * Columns are named c1, c2, ...
 *
 * # Safety
 * `values` must point to `n_rows * n_cols` doubles; `out` must be writable.
 */
enum CkStatus ck_dataset_from_columns(const double *values,
                                      size_t n_rows,
                                      size_t n_cols,
                                      struct CkDataset **out);

/**
 * # Safety
 * `d` must come from a `ck_dataset_*` constructor; outputs must be writable.
 */
enum CkStatus ck_dataset_shape(const struct CkDataset *d, size_t *n_rows, size_t *n_cols);

/**
 * Writes the n_cols × n_cols correlation matrix, row-major, to `out`.
 *
 * # Safety
 * `d` must be a live dataset handle; `out` must hold n_cols² doubles.
 */
enum CkStatus ck_dataset_correlation_matrix(const struct CkDataset *d,
                                            enum CkKind kind,
                                            double *out);

/**
 * # Safety
 * `d` must come from a `ck_dataset_*` constructor and not be used afterwards. NULL is ignored.
 */
void ck_dataset_free(struct CkDataset *d);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CORRKIT_H */
