#ifndef EIFCHECK_H
#define EIFCHECK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EifStatus {
  EIF_STATUS_OK = 0,
  EIF_STATUS_NULL_POINTER = 1,
  EIF_STATUS_INVALID_UTF8 = 2,
  EIF_STATUS_PARSE = 3,
  EIF_STATUS_DOMAIN = 4,
  EIF_STATUS_POSITIVITY = 5,
  EIF_STATUS_PRECONDITION = 6,
  EIF_STATUS_MODEL = 7,
  EIF_STATUS_DEGENERATE = 8,
  EIF_STATUS_INVALID = 9,
  EIF_STATUS_IO = 10,
  EIF_STATUS_BUFFER_TOO_SMALL = 11,
  EIF_STATUS_PANIC = 12,
} EifStatus;

// Opaque distribution handle.
typedef struct EifDistribution EifDistribution;

// Opaque influence-function handle.
typedef struct EifInfluence EifInfluence;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *eif_version(void);

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length in bytes,
// excluding the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t eif_last_error(char *buf, size_t len);

// Parses a distribution file (JSON text).
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum EifStatus eif_distribution_from_json(const char *json, struct EifDistribution **out);

// Seeded random distribution of the given shape (JSON, e.g.
// `{"family": "point", "w_levels": 3}`).
//
// # Safety
// `shape_json` must be a NUL-terminated string; `out` must be writable.
enum EifStatus eif_distribution_generate(const char *shape_json,
                                         uint64_t seed,
                                         struct EifDistribution **out);

// # Safety
// `d` must be null or a handle from this library, not yet freed.
void eif_distribution_free(struct EifDistribution *d);

// Number of outcome points.
//
// # Safety
// `d` must be a live handle; `out` must be writable.
enum EifStatus eif_distribution_num_points(const struct EifDistribution *d, size_t *out);

// Joint probabilities in flat order (first variable most significant).
// Writes `min(len, num_points)` values and stores the point count in
// `written`; returns `BufferTooSmall` when `len` is short.
//
// # Safety
// `d` must be a live handle; `buf` must hold `len` doubles; `written` must
// be writable.
enum EifStatus eif_distribution_joint(const struct EifDistribution *d,
                                      double *buf,
                                      size_t len,
                                      size_t *written);

// `Psi(P)` for a parameter given as JSON (e.g. `{"kind": "tsm"}`).
//
// # Safety
// `d` must be a live handle; `parameter_json` NUL-terminated; `out` writable.
enum EifStatus eif_psi(const struct EifDistribution *d, const char *parameter_json, double *out);

// Builds `D*(P)` for a parameter given as JSON.
//
// # Safety
// `d` must be a live handle; `parameter_json` NUL-terminated; `out` writable.
enum EifStatus eif_influence_new(const struct EifDistribution *d,
                                 const char *parameter_json,
                                 struct EifInfluence **out);

// # Safety
// `f` must be null or a handle from this library, not yet freed.
void eif_influence_free(struct EifInfluence *f);

// `Psi(P)` and `Var_P(D*)` stored with the influence function.
//
// # Safety
// `f` must be a live handle; `psi` and `variance` writable.
enum EifStatus eif_influence_summary(const struct EifInfluence *f, double *psi, double *variance);

// The `D*` table in flat outcome order; same buffer protocol as
// [`eif_distribution_joint`].
//
// # Safety
// `f` must be a live handle; `buf` must hold `len` doubles; `written`
// writable.
enum EifStatus eif_influence_values(const struct EifInfluence *f,
                                    double *buf,
                                    size_t len,
                                    size_t *written);

// Number of named components.
//
// # Safety
// `f` must be a live handle; `out` writable.
enum EifStatus eif_influence_num_components(const struct EifInfluence *f, size_t *out);

// Values of component `index`; same buffer protocol as
// [`eif_distribution_joint`].
//
// # Safety
// `f` must be a live handle; `buf` must hold `len` doubles; `written`
// writable.
enum EifStatus eif_influence_component(const struct EifInfluence *f,
                                       size_t index,
                                       double *buf,
                                       size_t len,
                                       size_t *written);

// Riesz check of `D*` against `n_scores` seeded random scores at step `h`;
// stores the largest absolute error.
//
// # Safety
// `d` must be a live handle; `parameter_json` NUL-terminated;
// `max_abs_error` writable.
enum EifStatus eif_riesz_check(const struct EifDistribution *d,
                               const char *parameter_json,
                               uint64_t seed,
                               size_t n_scores,
                               double h,
                               double *max_abs_error);

// Runs the verification suite for a JSON configuration (`"{}"` for the
// defaults). On success `report_json` receives a string to release with
// [`eif_string_free`], and `pass` is 1 when every check passed.
//
// # Safety
// `config_json` NUL-terminated; `report_json` and `pass` writable.
enum EifStatus eif_run_suite(const char *config_json, char **report_json, int32_t *pass);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void eif_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EIFCHECK_H */
