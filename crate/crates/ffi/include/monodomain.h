#ifndef MONODOMAIN_H
#define MONODOMAIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Values 2 to 6 match the process exit codes of the CLI.
 */
typedef enum MdStatus {
  MD_STATUS_OK = 0,
  MD_STATUS_NULL_POINTER = 1,
  MD_STATUS_INVALID_CONFIG = 2,
  MD_STATUS_IO = 3,
  MD_STATUS_MESH = 4,
  MD_STATUS_LINEAR_SOLVE = 5,
  MD_STATUS_NEWTON = 6,
  /**
   * The handle has not been run yet, or an index is out of range.
   */
  MD_STATUS_INVALID_STATE = 7,
  MD_STATUS_BUFFER_TOO_SMALL = 8,
  MD_STATUS_PANIC = 9,
} MdStatus;

/**
 * Opaque simulation handle.
 */
typedef struct MdSimulation MdSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create a simulation from TOML text in the CLI's configuration format.
 * `config` may be null for all defaults. On success `*out` owns a handle
 * to release with [`md_simulation_free`].
 *
 * # Safety
 * `config` must be null or a NUL-terminated string; `out` must be valid for
 * a pointer write.
 */
enum MdStatus md_simulation_new(const char *config, struct MdSimulation **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle from [`md_simulation_new`] not yet freed.
 */
void md_simulation_free(struct MdSimulation *sim);

/**
 * March to the configured final time and evaluate the indicators.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum MdStatus md_simulation_run(struct MdSimulation *sim);

/**
 * Number of mesh vertices, i.e. the length of each state vector.
 *
 * # Safety
 * `sim` must be a live handle and `out` valid for a write.
 */
enum MdStatus md_simulation_num_vertices(const struct MdSimulation *sim, size_t *out);

/**
 * Number of stored states, `N + 1` after a run.
 *
 * # Safety
 * `sim` must be a live handle and `out` valid for a write.
 */
enum MdStatus md_simulation_num_states(const struct MdSimulation *sim, size_t *out);

/**
 * Copy state `index` into `u` and `w`, each of capacity `len`, and its time
 * into `time` (which may be null).
 *
 * # Safety
 * `sim` must be a live handle; `u` and `w` must be valid for `len` writes.
 */
enum MdStatus md_simulation_state(const struct MdSimulation *sim,
                                  size_t index,
                                  double *u,
                                  double *w,
                                  size_t len,
                                  double *time);

/**
 * Indicators of step `step` (1-based, `1..=N`) and the cumulative upper
 * bound at its end. Any output pointer may be null.
 *
 * # Safety
 * `sim` must be a live handle; non-null outputs must be valid for a write.
 */
enum MdStatus md_simulation_indicators(const struct MdSimulation *sim,
                                       size_t step,
                                       double *eta,
                                       double *theta,
                                       double *gamma,
                                       double *cumulative);

/**
 * Copy the last error message of this thread, NUL-terminated and truncated
 * to `len` bytes, into `buf`. Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` writes.
 */
size_t md_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *md_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MONODOMAIN_H */
