#ifndef ZEITLIN_H
#define ZEITLIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum ZeitlinStatus {
  ZEITLIN_STATUS_OK = 0,
  ZEITLIN_STATUS_INVALID_ARGUMENT = 1,
  ZEITLIN_STATUS_SHAPE = 2,
  ZEITLIN_STATUS_DOMAIN = 3,
  ZEITLIN_STATUS_NON_CONVERGENCE = 4,
  ZEITLIN_STATUS_INTERNAL = 5,
  ZEITLIN_STATUS_LINALG = 6,
  ZEITLIN_STATUS_CONFIG = 7,
  ZEITLIN_STATUS_FORMAT = 8,
  ZEITLIN_STATUS_IO = 9,
  ZEITLIN_STATUS_NULL_POINTER = 10,
  ZEITLIN_STATUS_PANIC = 11,
} ZeitlinStatus;

// Time integrator selector for [`zeitlin_state_step`].
typedef enum ZeitlinIntegrator {
  ZEITLIN_INTEGRATOR_ISO2 = 0,
  ZEITLIN_INTEGRATOR_RKMK1 = 1,
  ZEITLIN_INTEGRATOR_RKMK2 = 2,
  ZEITLIN_INTEGRATOR_MIDPOINT = 3,
  ZEITLIN_INTEGRATOR_STRANG = 4,
  ZEITLIN_INTEGRATOR_RK4 = 5,
} ZeitlinIntegrator;

// Opaque model handle.
typedef struct ZeitlinModel ZeitlinModel;

// Opaque state handle (dense or factored).
typedef struct ZeitlinState ZeitlinState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t zeitlin_last_error(char *buf, size_t len);

// Creates a model of size `n`; `n_trunc = 0` means no diagonal truncation.
//
// # Safety
// `out` must be a valid pointer.
enum ZeitlinStatus zeitlin_model_new(size_t n, size_t n_trunc, struct ZeitlinModel **out);

// # Safety
// `model` must be null or come from [`zeitlin_model_new`], and not be used afterwards.
void zeitlin_model_free(struct ZeitlinModel *model);

// Builds an initial condition from a JSON scenario description.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum ZeitlinStatus zeitlin_state_from_scenario(const char *json, struct ZeitlinState **out);

// Wraps a dense skew-Hermitian `n × n` matrix given as `2 n²` doubles.
//
// # Safety
// `data` must point to `2 n²` readable doubles and `out` be valid.
enum ZeitlinStatus zeitlin_state_from_dense(size_t n,
                                            const double *data,
                                            struct ZeitlinState **out);

// Best rank-`r` factorization `U S U*` of `state`, as a new handle.
//
// # Safety
// `state` must be a live handle and `out` valid.
enum ZeitlinStatus zeitlin_state_truncate(const struct ZeitlinState *state,
                                          size_t r,
                                          struct ZeitlinState **out);

// # Safety
// `state` must be null or a handle not used afterwards.
void zeitlin_state_free(struct ZeitlinState *state);

// Writes `N` and the rank (`N` for dense states).
//
// # Safety
// All pointers must be valid.
enum ZeitlinStatus zeitlin_state_dims(const struct ZeitlinState *state, size_t *n, size_t *rank);

// Copies the dense matrix into `out` (`2 N²` doubles); `len` is the buffer length in doubles.
//
// # Safety
// `out` must point to `len` writable doubles.
enum ZeitlinStatus zeitlin_state_to_dense(const struct ZeitlinState *state,
                                          double *out,
                                          size_t len);

// Advances `state` in place by `steps` steps of size `dt`. `tol <= 0`
// selects the default fixed-point tolerance.
//
// # Safety
// `model` and `state` must be live handles.
enum ZeitlinStatus zeitlin_state_step(const struct ZeitlinModel *model,
                                      struct ZeitlinState *state,
                                      enum ZeitlinIntegrator integrator,
                                      double dt,
                                      size_t steps,
                                      double tol);

// Hamiltonian of `state` under `model`'s stream map.
//
// # Safety
// All pointers must be valid.
enum ZeitlinStatus zeitlin_hamiltonian(const struct ZeitlinModel *model,
                                       const struct ZeitlinState *state,
                                       double *out);

// Casimirs `C_1 … C_{k_max}` (real part for even `k`, imaginary part for odd `k`).
//
// # Safety
// `out` must point to `k_max` writable doubles.
enum ZeitlinStatus zeitlin_casimirs(const struct ZeitlinState *state, size_t k_max, double *out);

// Writes `state` to a checkpoint file.
//
// # Safety
// `path` must be a NUL-terminated string.
enum ZeitlinStatus zeitlin_checkpoint_write(const struct ZeitlinState *state, const char *path);

// Reads a checkpoint file into a new handle.
//
// # Safety
// `path` must be a NUL-terminated string and `out` valid.
enum ZeitlinStatus zeitlin_checkpoint_read(const char *path, struct ZeitlinState **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZEITLIN_H */
