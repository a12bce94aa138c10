#ifndef DERIVE_H
#define DERIVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  DM_STATUS_OK = 0,
  /**
   * A check or construction failed for mathematical reasons.
   */
  DM_STATUS_MATH_FAILURE = 1,
  /**
   * Malformed document, wrong shapes or degrees.
   */
  DM_STATUS_INVALID_INPUT = 2,
  DM_STATUS_NULL_POINTER = 3,
  DM_STATUS_INVALID_UTF8 = 4,
  /**
   * A Rust panic was caught at the boundary; the library state is intact.
   */
  DM_STATUS_INTERNAL = 5,
} DmStatus;

/**
 * A parsed structure. It need not satisfy its equations; operations that
 * need a derived chart verify it first and report `DM_STATUS_MATH_FAILURE`.
 */
typedef struct DmChart DmChart;

typedef struct DmMorphism DmMorphism;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread; empty after success.
 */
const char *dm_last_error(void);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void dm_string_free(char *s);

/**
 * Parses a chart document (JSON).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
DmStatus dm_chart_from_json(const char *json, DmChart **out);

/**
 * # Safety
 * `chart` must come from this library or be null.
 */
void dm_chart_free(DmChart *chart);

/**
 * Serializes the chart's structure as a chart document.
 *
 * # Safety
 * `chart` must be a live handle; `out` must be writable.
 */
DmStatus dm_chart_to_json(const DmChart *chart, char **out);

/**
 * Checks the structure equations; `*pass` is 1 or 0. When they fail, the
 * first witness is left in `dm_last_error`.
 *
 * # Safety
 * `chart` must be a live handle; `pass` must be writable.
 */
DmStatus dm_chart_check(const DmChart *chart, int *pass);

/**
 * # Safety
 * `chart` must be a live handle; `out` must be writable.
 */
DmStatus dm_chart_vdim(const DmChart *chart, int64_t *out);

/**
 * The derived path space of a chart.
 *
 * # Safety
 * `chart` must be a live handle; `out` must be writable.
 */
DmStatus dm_path_space(const DmChart *chart, DmChart **out);

/**
 * Parses a morphism document between two charts.
 *
 * # Safety
 * `json` must be NUL-terminated; `source`, `target` live handles; `out` writable.
 */
DmStatus dm_morphism_from_json(const char *json,
                               const DmChart *source,
                               const DmChart *target,
                               DmMorphism **out);

/**
 * # Safety
 * `m` must come from this library or be null.
 */
void dm_morphism_free(DmMorphism *m);

/**
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
DmStatus dm_morphism_to_json(const DmMorphism *m, char **out);

/**
 * Checks the morphism equations between the given charts; `*pass` is 1 or 0.
 *
 * # Safety
 * All handles must be live; `pass` must be writable.
 */
DmStatus dm_morphism_check(const DmMorphism *m,
                           const DmChart *source,
                           const DmChart *target,
                           int *pass);

/**
 * Transfers the chart's structure along a contraction document; returns
 * the retract and the transferred inclusion retract → chart.
 *
 * # Safety
 * `chart` must be live; `contraction_json` NUL-terminated; outputs writable.
 */
DmStatus dm_transfer(const DmChart *chart,
                     const char *contraction_json,
                     DmChart **retract_out,
                     DmMorphism **inclusion_out);

/**
 * Runs one `derive` command line (argv[0] is the program name) and returns
 * the rendered report and the process exit code it would have.
 *
 * # Safety
 * `argv` must hold `argc` NUL-terminated strings; outputs must be writable.
 */
DmStatus dm_run(int argc, const char *const *argv, char **report_out, int *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DERIVE_H */
