#ifndef BINMIX_H
#define BINMIX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes; the non-zero values from 2 to 5 match the command-line exit codes.
 */
typedef enum BinmixStatus {
  BINMIX_STATUS_OK = 0,
  /*
   null pointer, invalid UTF-8 or a buffer of the wrong length
   */
  BINMIX_STATUS_INVALID_ARGUMENT = 1,
  BINMIX_STATUS_CONFIG = 2,
  BINMIX_STATUS_NON_CONVERGENCE = 3,
  BINMIX_STATUS_POSITIVITY = 4,
  BINMIX_STATUS_IO = 5,
  /*
   a Rust panic was caught at the boundary
   */
  BINMIX_STATUS_INTERNAL = 6,
} BinmixStatus;

typedef enum BinmixField {
  BINMIX_FIELD_RHO1 = 0,
  BINMIX_FIELD_RHO2 = 1,
  /*
   x velocity on vertical edges
   */
  BINMIX_FIELD_U = 2,
  /*
   y velocity on horizontal edges
   */
  BINMIX_FIELD_V = 3,
  BINMIX_FIELD_Q = 4,
} BinmixField;

/*
 Opaque simulation handle.
 */
typedef struct BinmixSimulation BinmixSimulation;

/*
 Diagnostics of the most recent step (all zero except energy and masses before the first step).
 */
typedef struct BinmixDiagnostics {
  uint64_t step;
  double time;
  double energy;
  double kinetic;
  double mass1;
  double mass2;
  uint64_t iterations;
  double residual;
  double shear;
  double volumetric;
  double mixing;
  double identity_residual;
} BinmixDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Creates a simulation from a configuration file.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer; on success
 `*out` owns a handle to be released with [`binmix_simulation_free`].
 */
enum BinmixStatus binmix_simulation_from_file(const char *path, struct BinmixSimulation **out);

/*
 Creates a simulation from configuration text.

 # Safety
 As [`binmix_simulation_from_file`].
 */
enum BinmixStatus binmix_simulation_from_text(const char *text, struct BinmixSimulation **out);

/*
 Releases a handle; null is ignored.

 # Safety
 `sim` must be null or a handle from this library not yet freed.
 */
void binmix_simulation_free(struct BinmixSimulation *sim);

/*
 Advances `steps` time steps. On failure the state is that of the last
 completed step.

 # Safety
 `sim` must be a live handle.
 */
enum BinmixStatus binmix_simulation_step(struct BinmixSimulation *sim, uint64_t steps);

/*
 Copies the diagnostics of the most recent step.

 # Safety
 `sim` must be a live handle and `out` a valid pointer.
 */
enum BinmixStatus binmix_simulation_diagnostics(const struct BinmixSimulation *sim,
                                                struct BinmixDiagnostics *out);

/*
 Reports the number of columns and rows [`binmix_simulation_copy_field`] writes.

 # Safety
 `sim` must be a live handle; `nx` and `ny` valid pointers.
 */
enum BinmixStatus binmix_simulation_field_shape(const struct BinmixSimulation *sim,
                                                enum BinmixField field,
                                                size_t *nx,
                                                size_t *ny);

/*
 Copies a field row-major (x fastest) into `buf`, whose length must equal
 the product reported by [`binmix_simulation_field_shape`].

 # Safety
 `sim` must be a live handle and `buf` valid for `len` writes.
 */
enum BinmixStatus binmix_simulation_copy_field(const struct BinmixSimulation *sim,
                                               enum BinmixField field,
                                               double *buf,
                                               size_t len);

/*
 Copies the calling thread's last error message, NUL-terminated and
 truncated to `len - 1` bytes. Returns the full message length in bytes.

 # Safety
 `buf` must be null (to query the length) or valid for `len` writes.
 */
size_t binmix_last_error(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BINMIX_H */
